"""Acceptance criteria 1-10; every test prints one PASS/FAIL line to the terminal."""

import json
import math

import numpy as np
import pytest

from exactmc.cftp import CftpSchedule, cftp_batch, cftp_sample, monotone_cftp_sample, pi_subroutine
from exactmc.chain import check_detailed_balance, empirical_distribution, total_variation
from exactmc.cli import _schedule, main, time_scales
from exactmc.config import build_update, load_config, observable_fn
from exactmc.costs import gain_exponent, polynomial_gain, run_benchmark
from exactmc.estimators import forward_mcmc, observable_mean
from exactmc.grover import (DetectionProblem, admissible_oracle_wrap, diffusion, marked_probability,
                            oracle_phase_flip, quantum_cftp_sample, quantum_pi_subroutine, round_rng,
                            success_probability, uniform_over)
from exactmc.models import gibbs_distribution, induced_transition_matrix
from exactmc.rng import RngStream, derive_seed, derive_seeds

from conftest import CONFIG_DIR, SHIPPED

# exact enumeration (independent mpmath script)
CHAIN3_PI = [0.208436032884569, 0.114392120228329, 0.0627797266587736, 0.114392120228329,
             0.114392120228329, 0.0627797266587736, 0.114392120228329, 0.208436032884569]
CHAIN3_ENERGY = -0.582625224903182
SINGLE_SPIN_M = 0.46211715726000976


@pytest.fixture
def report(capsys):
    def _report(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _report


def _update(name):
    return build_update(load_config(CONFIG_DIR / name))


def _tv(u, x_c):
    return total_variation(empirical_distribution(x_c, u.N), gibbs_distribution(u.model))


def test_1_cftp_exactness(report):
    u3, u4 = _update("chain3_beta03.json"), _update("square22_beta05.json")
    assert np.allclose(gibbs_distribution(u3.model), CHAIN3_PI, atol=1e-13)
    b3 = cftp_batch(u3, CftpSchedule(), derive_seeds(101, 100_000))
    b4 = cftp_batch(u4, CftpSchedule(), derive_seeds(102, 100_000))
    tv3, tv4 = _tv(u3, b3.x_c), _tv(u4, b4.x_c)
    report(1, tv3 < 0.015 and tv4 < 0.015 and not (b3.aborted.any() or b4.aborted.any()),
           f"TV chain3 beta=0.3 {tv3:.4f}, 2x2 beta=0.5 {tv4:.4f} (10^5 samples each, bound 0.015)")


def test_2_monotone_full_equivalence(report):
    cfg = load_config(CONFIG_DIR / "square23_ferro.json")
    u = build_update(cfg)
    sched = _schedule(cfg, u)
    seeds = derive_seeds(202, 1000)
    bad = sum(monotone_cftp_sample(u, sched, int(s)) != cftp_sample(u, sched, int(s), "full") for s in seeds)
    report(2, bad == 0, f"{bad} mismatches of (x_c, T_star) over 1000 seeds on the 2x3 lattice")


def test_3_detailed_balance(report):
    failed = []
    for path in SHIPPED:
        u = _update(path.name)
        assert u.N <= 1024
        if not check_detailed_balance(induced_transition_matrix(u), gibbs_distribution(u.model), 1e-9):
            failed.append(path.stem)
    report(3, not failed, f"{len(SHIPPED) - len(failed)}/{len(SHIPPED)} shipped models balanced at tol 1e-9"
           + (f"; failing: {failed}" if failed else ""))


def test_4_time_scale_hierarchy(report):
    lines, ok = [], True
    for path in SHIPPED:
        cfg = load_config(path)
        cfg["tau"]["runs"] = 10_000
        r = time_scales(cfg)
        ok &= r["tau_obs_le_tau"] and r["tau_le_tau_hat_bound"]
        lines.append(f"{path.stem}: tau_O={r['tau_obs']:.3g} tau={r['tau']:.4g} tau_hat={r['tau_hat']:.3g}")
    report(4, ok, "; ".join(lines))


def test_5_grover_iterate(report):
    rng = np.random.default_rng(505)
    worst = 0.0
    # the marked set excludes y1's preimage, so M < N
    for N in range(2, 2**10 + 1):
        for M in range(1, min(8, N - 1) + 1):
            images = np.zeros(N, dtype=np.int64)
            images[rng.choice(N, size=M, replace=False)] = 1
            prob = DetectionProblem(images, 0)
            state = uniform_over(N)
            for k in range(51):
                worst = max(worst, abs(marked_probability(state, prob) - success_probability(N, M, k)))
                state = diffusion(oracle_phase_flip(state, prob))
    p4 = marked_probability(diffusion(oracle_phase_flip(uniform_over(4), DetectionProblem([0, 1, 0, 0], 0))),
                            DetectionProblem([0, 1, 0, 0], 0))
    report(5, worst <= 1e-8 and abs(p4 - 1) <= 1e-10,
           f"max deviation {worst:.2e} over N<=1024, M<=8, k<=50; N=4 M=1 k=1 gives {p4:.12f}")


def test_6_quadratic_separation(report):
    Ns = [2**k for k in range(6, 15)]
    _, summary = run_benchmark([(N, 1) for N in Ns], 1000, seed=606)
    s = summary["per_M"]["M=1"]
    report(6, s["classical_pass"] and s["quantum_pass"],
           f"M=1 slopes: classical {s['classical_slope']:.3f} (band 0.9-1.1), "
           f"quantum {s['quantum_slope']:.3f} (band 0.4-0.6)")


@pytest.mark.slow
def test_7_quantum_cftp_exactness(report):
    u = _update("chain3_beta03.json")
    sched = CftpSchedule()
    eps = 1e-3
    x_c = np.array([quantum_cftp_sample(u, sched, int(s), eps).x_c for s in derive_seeds(707, 100_000)])
    tv = _tv(u, x_c)
    disagree, checked = 0, 0
    for k, s in enumerate(derive_seeds(708, 1000)):
        T = 1 + k % 12  # short lookbacks keep both verdicts in play
        c = pi_subroutine(u, RngStream(s), T)
        q = quantum_pi_subroutine(u, RngStream(s), T, eps, round_rng(int(s), T))
        checked += 1
        disagree += (c.coalesced != q.report.coalesced) or (c.coalesced and c.x_c != q.report.x_c)
    rate = disagree / checked
    report(7, tv < 0.02 and rate <= eps,
           f"TV {tv:.4f} over 10^5 quantum samples (bound 0.02); verdict disagreement {disagree}/{checked}")


def test_8_error_formulas(report):
    u = _update("chain3_beta03.json")
    energy = observable_fn("energy", u.model)
    real_hits = 0
    for b in range(100):
        st = observable_mean(cftp_batch(u, CftpSchedule(), derive_seeds(808, 1000, b)).x_c, energy)
        assert st.err == pytest.approx(st.stddev / math.sqrt(1000), rel=1e-15)
        real_hits += abs(st.mean - CHAIN3_ENERGY) <= 3 * st.err
    s = _update("single_spin.json")
    mag = observable_fn("magnetization", s.model)
    fwd_hits = 0
    for b in range(100):
        st = forward_mcmc(s, 0, 4000, mag, derive_seed(809, b))
        assert st.err == pytest.approx(math.sqrt(2 * st.tau_obs / st.T) * st.stddev, rel=1e-12)
        fwd_hits += abs(st.mean - SINGLE_SPIN_M) <= 3 * st.err
    report(8, real_hits >= 99 and fwd_hits >= 95,
           f"realization-mode coverage {real_hits}/100 (need 99), forward-mode {fwd_hits}/100 (need 95)")


def test_9_determinism(report, tmp_path):
    cfg = CONFIG_DIR / "square22_beta05.json"
    runs = []
    for d in ("a", "b"):
        assert main(["sample", "--config", str(cfg), "--out", str(tmp_path / d), "--threads", "2"]) == 0
        runs.append({p.name: p.read_bytes() for p in (tmp_path / d).iterdir()})
    same = runs[0] == runs[1]
    replay = main(["replay", "--config", str(cfg), "--records", str(tmp_path / "a" / "samples.jsonl")])
    qcfg = tmp_path / "q.json"
    doc = json.loads(cfg.read_text())
    doc["sampler"]["R"] = 50
    qcfg.write_text(json.dumps(doc))
    assert main(["qsample", "--config", str(qcfg), "--out", str(tmp_path / "q")]) == 0
    qreplay = main(["replay", "--config", str(qcfg), "--records", str(tmp_path / "q" / "qsamples.jsonl")])
    report(9, same and replay == 0 and qreplay == 0,
           f"identical output files: {same}; replay exit codes sample={replay}, qsample={qreplay}")


def test_10_admissible_subset(report):
    u = _update("hardcore_c4.json")
    states = np.arange(u.N)
    admissible = states[np.asarray(u.model.is_admissible(states))]
    assert admissible.size == 7
    wrapped = admissible_oracle_wrap(u, int(admissible[0]))
    b = cftp_batch(wrapped, CftpSchedule(), derive_seeds(1010, 100_000), "full")
    tv = _tv(u, b.x_c)
    grid = [0.05, 0.2, 0.35, 0.45, 0.55, 0.7, 0.9, 1.0]
    wrong = [(b_, c) for b_ in grid for c in grid if polynomial_gain(c, b_) == (b_ < 0.5 and c > 0.5)]
    for c in grid:
        assert polynomial_gain(c) and gain_exponent(c) > 1
    report(10, tv < 0.015 and not wrong and np.all(u.model.is_admissible(b.x_c)),
           f"TV {tv:.4f} over 10^5 wrapped-map samples (bound 0.015); "
           f"gain-flag grid {len(grid) ** 2 - len(wrong)}/{len(grid) ** 2} match")
