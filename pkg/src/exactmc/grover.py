"""Statevector simulation of Grover-based coalescence detection.

Only the first register is simulated. After ``T`` steps the joint state is
``sum_x |x>|G_T(x)>`` with every ancilla uncomputed, so the second register
is a classical function of the first and the phase oracle reduces to a sign
flip on ``{x : G_T(x) != y1}``. The map itself is evaluated classically with
the same past uniforms as the classical ``Pi(T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cftp import CftpSchedule, CoalescenceReport, CoalescenceTimeout, evolve, tracked_starts
from .rng import RngStream

MAX_QUBITS = 24
DEFAULT_EPSILON = 1e-3
# 1.3 rather than 6/5: both lie in the admissible range (1, 4/3); the larger
# factor shortens the small-N transient of the unknown-M search
GROWTH = 1.3
BUDGET_FACTOR = 4.5
PRECHECK_MEASUREMENTS = 8


@dataclass
class QueryLedger:
    """Cost counters for one detection run or a whole quantum CFTP run.

    ``oracle_calls`` counts Grover iterations; ``gate_cost`` adds the lookback
    ``T`` for each of them (one oracle evolves every history through ``T``
    maps). ``map_evaluations`` is the classical simulation cost, ``N`` per
    oracle application.
    """

    oracle_calls: int = 0
    map_evaluations: int = 0
    gate_cost: int = 0
    measurements: int = 0
    verifications: int = 0
    rounds: int = 0

    def add(self, other: "QueryLedger") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class DetectionProblem:
    """Find some ``x`` with ``images[x] != y1`` without knowing how many exist."""

    images: np.ndarray
    y1: int
    step_cost: int = 1
    marked: np.ndarray = field(init=False, repr=False)
    signs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.int64)
        if self.images.ndim != 1 or self.images.size == 0:
            raise ValueError("map must be a non-empty 1-d table")
        if not np.any(self.images == self.y1):
            raise ValueError(f"y1={self.y1} is not in the image of the map")
        self.marked = self.images != self.y1
        self.signs = np.where(self.marked, -1.0, 1.0)

    @property
    def N(self) -> int:
        return int(self.images.size)

    @property
    def M(self) -> int:
        return int(np.count_nonzero(self.marked))


@dataclass
class Detection:
    found: int | None
    ledger: QueryLedger
    schedules: int


def uniform_state(n: int) -> np.ndarray:
    """Equal superposition over ``2**n`` basis states."""
    if not 0 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must lie in [0, {MAX_QUBITS}]")
    return uniform_over(2**n)


def uniform_over(N: int) -> np.ndarray:
    return np.full(N, 1.0 / math.sqrt(N), dtype=np.complex128)


def oracle_phase_flip(state: np.ndarray, problem: DetectionProblem,
                      ledger: QueryLedger | None = None) -> np.ndarray:
    """Phase ``-1`` on every marked ``x`` (kickback from ``(|0> - |1>)/sqrt 2``)."""
    if ledger is not None:
        ledger.oracle_calls += 1
        ledger.map_evaluations += problem.N
        ledger.gate_cost += problem.step_cost
    return state * problem.signs


def diffusion(state: np.ndarray) -> np.ndarray:
    """Reflection about the uniform vector: ``2 <a> - a``."""
    return 2.0 * state.mean() - state


def grover_iterate(state: np.ndarray, problem: DetectionProblem, k: int,
                   ledger: QueryLedger | None = None) -> np.ndarray:
    for _ in range(k):
        state = diffusion(oracle_phase_flip(state, problem, ledger))
    return state


def marked_probability(state: np.ndarray, problem: DetectionProblem) -> float:
    return float(np.sum(np.abs(state[problem.marked]) ** 2))


def success_probability(N: int, M: int, k: int) -> float:
    """``sin^2((2k + 1) asin(sqrt(M/N)))``."""
    if not 1 <= M <= N:
        raise ValueError("need 1 <= M <= N")
    if k < 0:
        raise ValueError("iteration count must be non-negative")
    theta = math.asin(math.sqrt(M / N))
    return math.sin((2 * k + 1) * theta) ** 2


def measure(state: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(np.abs(state) ** 2)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), state.size - 1))


def repetitions(epsilon: float) -> int:
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    return max(1, math.ceil(math.log2(1.0 / epsilon)))


def schedule_cap(N: int, budget_factor: float = BUDGET_FACTOR) -> int:
    return int(math.ceil(budget_factor * math.sqrt(N)))


def detect_noncoalesced(problem: DetectionProblem, rng, epsilon: float = DEFAULT_EPSILON,
                        budget: int | None = None, growth: float = GROWTH,
                        budget_factor: float = BUDGET_FACTOR,
                        ledger: QueryLedger | None = None) -> Detection:
    """Search for a marked state with an unknown number of marked states.

    Each schedule draws an iteration count uniformly below ``m``, runs that
    many Grover iterations from the uniform state, measures, and verifies the
    outcome with one direct map evaluation; ``m`` grows by ``growth`` up to
    ``sqrt(N)``. A schedule stops once it would exceed
    ``budget_factor * sqrt(N)`` oracle calls, which bounds its miss
    probability by 1/2 whenever ``M >= 1``; ``ceil(log2(1/epsilon))``
    schedules bring it under ``epsilon``. Returned states are always marked.
    """
    rng = np.random.default_rng(rng)
    ledger = QueryLedger() if ledger is None else ledger
    N = problem.N
    cap = schedule_cap(N, budget_factor)
    reps = repetitions(epsilon)
    if budget is None:
        budget = reps * cap
    if budget < 1:
        raise ValueError("budget must be at least one oracle call")
    start_calls = ledger.oracle_calls
    m_max = math.sqrt(N)
    for rep in range(reps):
        m, used = 1.0, 0
        for _ in range(64 * cap + 64):
            k = int(rng.integers(0, math.ceil(m)))
            if used + k > cap:
                break
            if ledger.oracle_calls - start_calls + k > budget:
                return Detection(None, ledger, rep + 1)
            state = grover_iterate(uniform_over(N), problem, k, ledger)
            used += k
            ledger.rounds += 1
            x = measure(state, rng)
            ledger.measurements += 1
            ledger.verifications += 1
            if problem.images[x] != problem.y1:
                return Detection(x, ledger, rep + 1)
            m = min(growth * m, m_max)
    return Detection(None, ledger, reps)


def measure_second_register(images, rng) -> int:
    """Outcome ``G_T(x)`` for ``x`` uniform, i.e. ``y`` with probability ``|G_T^-1(y)|/N``."""
    images = np.asarray(images)
    return int(images[int(np.random.default_rng(rng).integers(images.size))])


def repeated_measurement_count(images, rng, max_draws: int | None = None,
                               chunk: int = 4096) -> int | None:
    """Measurements of the second register until two distinct values have been seen.

    Returns ``None`` if ``max_draws`` measurements all agree.
    """
    images = np.asarray(images)
    rng = np.random.default_rng(rng)
    first = None
    drawn = 0
    while max_draws is None or drawn < max_draws:
        size = chunk if max_draws is None else min(chunk, max_draws - drawn)
        vals = images[rng.integers(images.size, size=size)]
        if first is None:
            first = vals[0]
        diff = np.nonzero(vals != first)[0]
        if diff.size:
            return drawn + int(diff[0]) + 1
        drawn += size
    return None


# ------------------------------------------------------------ quantum CFTP

class AdmissibleWrap:
    """Update whose start states are sent to ``x_a`` when not admissible.

    Grover search over the wrapped map still ranges over all ``2**n`` starts.
    """

    def __init__(self, update, x_a: int):
        if not update.model.is_admissible(x_a):
            raise ValueError(f"x_a={x_a} is not an admissible state")
        self.update = update
        self.x_a = int(x_a)

    def prepare(self, x):
        x = np.asarray(self.update.prepare(x), dtype=np.int64)
        out = np.where(self.update.model.is_admissible(x), x, self.x_a)
        return int(out) if out.ndim == 0 else out

    @property
    def monotone(self) -> bool:
        return False

    def __getattr__(self, name):
        return getattr(self.update, name)


def admissible_oracle_wrap(u, x_a: int) -> AdmissibleWrap:
    return AdmissibleWrap(u, x_a)


@dataclass
class QuantumRound:
    report: CoalescenceReport
    ledger: QueryLedger
    witness: int | None
    y1: int


@dataclass
class QuantumCftpResult:
    x_c: int
    T_star: int
    ledger: QueryLedger
    rounds: list[QuantumRound] = field(default_factory=list, repr=False)


def round_rng(seed: int, T: int) -> np.random.Generator:
    """Measurement randomness for the round at lookback ``T`` (independent of the map uniforms)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(T),)))


def quantum_pi_subroutine(u, stream, T: int, epsilon: float = DEFAULT_EPSILON, rng=None,
                          precheck: int = PRECHECK_MEASUREMENTS, growth: float = GROWTH,
                          budget_factor: float = BUDGET_FACTOR, state_cap: int = 2**16) -> QuantumRound:
    """Coalescence verdict from one measurement of the second register plus Grover detection.

    A noncoalesced verdict always comes with two observed distinct values;
    a coalesced verdict is wrong with probability at most ``epsilon``.
    """
    repetitions(epsilon)
    if rng is None:
        rng = round_rng(int(stream.seeds), T)
    images = evolve(u, stream, T, tracked_starts(u, "full", state_cap))
    return verdict_from_images(images, T, rng, epsilon, precheck, growth, budget_factor)


def verdict_from_images(images, T: int, rng, epsilon: float = DEFAULT_EPSILON,
                        precheck: int = PRECHECK_MEASUREMENTS, growth: float = GROWTH,
                        budget_factor: float = BUDGET_FACTOR, step_cost: int | None = None) -> QuantumRound:
    """Quantum coalescence verdict for an evaluated map ``x -> images[x]``.

    Each oracle call is charged ``step_cost`` gates, ``T`` map steps by default.
    """
    rng = np.random.default_rng(rng)
    ledger = QueryLedger()
    y1 = measure_second_register(images, rng)
    ledger.measurements += 1
    for _ in range(max(0, precheck - 1)):
        y = measure_second_register(images, rng)
        ledger.measurements += 1
        if y != y1:
            return QuantumRound(CoalescenceReport(T, False, 2, None, "full"), ledger, None, y1)
    problem = DetectionProblem(images, y1, step_cost=T if step_cost is None else step_cost)
    det = detect_noncoalesced(problem, rng, epsilon, growth=growth,
                              budget_factor=budget_factor, ledger=ledger)
    if det.found is not None:
        return QuantumRound(CoalescenceReport(T, False, 2, None, "full"), ledger, det.found, y1)
    return QuantumRound(CoalescenceReport(T, True, 1, y1, "full"), ledger, None, y1)


def quantum_cftp_sample(u, schedule: CftpSchedule, seed: int, epsilon: float = DEFAULT_EPSILON,
                        keep_rounds: bool = False, **kw) -> QuantumCftpResult:
    """CFTP loop with the quantum verdict; the ledger accumulates over rounds."""
    repetitions(epsilon)
    stream = RngStream(seed)
    total = QueryLedger()
    kept = []
    last = None
    for T in schedule.lookbacks():
        rnd = quantum_pi_subroutine(u, stream, T, epsilon, round_rng(seed, T), **kw)
        total.add(rnd.ledger)
        if keep_rounds:
            kept.append(rnd)
        last = rnd
        if rnd.report.coalesced:
            return QuantumCftpResult(rnd.report.x_c, T, total, kept)
    raise CoalescenceTimeout(f"quantum CFTP: no coalescence verdict by T={last.report.T} (cap {schedule.cap})")
