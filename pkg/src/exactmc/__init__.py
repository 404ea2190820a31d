"""Exact equilibrium sampling by coupling from the past, with a simulated Grover coalescence detector."""

from .cftp import (CftpSchedule, CoalescenceReport, CoalescenceTimeout, cftp_batch, cftp_sample,
                   estimate_coalescence_time, monotone_cftp_sample, pi_subroutine)
from .chain import (DegenerateChainError, StateSpace, TimeScales, check_detailed_balance, spectral_gap,
                    stationary_distribution, total_variation)
from .costs import CostModel, classical_cost, gain_exponent, polynomial_gain, quantum_cost, run_benchmark
from .estimators import ObservableStats, forward_mcmc, observable_mean
from .grover import (DetectionProblem, QueryLedger, admissible_oracle_wrap, detect_noncoalesced,
                     quantum_cftp_sample, quantum_pi_subroutine, success_probability)
from .models import (CoupledUpdate, HardCoreModel, IsingModel, Lattice, apply_update, build_lattice,
                     gibbs_distribution, induced_transition_matrix)
from .rng import RngStream, derive_seed, rng_alpha

__version__ = "0.1.0"

__all__ = [
    "CftpSchedule", "CoalescenceReport", "CoalescenceTimeout", "CostModel", "CoupledUpdate",
    "DegenerateChainError", "DetectionProblem", "HardCoreModel", "IsingModel", "Lattice",
    "ObservableStats", "QueryLedger", "RngStream", "StateSpace", "TimeScales", "admissible_oracle_wrap",
    "apply_update", "build_lattice", "cftp_batch", "cftp_sample", "check_detailed_balance",
    "classical_cost", "derive_seed", "detect_noncoalesced", "estimate_coalescence_time",
    "forward_mcmc", "gain_exponent", "gibbs_distribution", "induced_transition_matrix",
    "monotone_cftp_sample", "observable_mean", "pi_subroutine", "polynomial_gain",
    "quantum_cftp_sample", "quantum_cost", "quantum_pi_subroutine", "rng_alpha", "run_benchmark",
    "spectral_gap", "stationary_distribution", "success_probability", "total_variation",
]
