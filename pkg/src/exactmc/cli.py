"""Command-line entry point: ``exactmc <command> [options]``.

Commands
--------
sample     exact samples by classical coupling from the past
qsample    exact samples with the simulated Grover coalescence verdict
tau        coalescence time, spectral relaxation time and observable correlation time
qdetect    Grover detection on an explicit map file or on a model's ``G_T``
bench      classical vs quantum detection scaling benchmark
validate   invariant suite on a model config or a transition-matrix file
replay     recompute records of a previous ``sample``/``qsample`` run and compare

Exit codes: 0 success, 1 validation error, 2 runtime abort (cap exceeded),
3 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cftp import (CftpSchedule, CoalescenceTimeout, NotMonotoneError, calibrate_delta_t, cftp_batch,
                   cftp_sample, estimate_coalescence_time, evolve, tracked_starts)
from .chain import (DegenerateChainError, check_detailed_balance, load_matrix, spectral_gap,
                    stationary_distribution)
from .config import ConfigError, build_update, config_hash, load_config, observable_fn, parse_config
from .costs import FitError, run_benchmark, run_cftp_benchmark, write_records_csv
from .estimators import forward_mcmc
from .grover import (admissible_oracle_wrap, diffusion, oracle_phase_flip, quantum_cftp_sample,
                     verdict_from_images, DetectionProblem, uniform_over)
from .models import (MAX_MATRIX_SITES, IsingModel, boltzmann_mean, gibbs_distribution,
                     induced_transition_matrix, site_transition_matrix)
from .rng import RngStream, derive_seed, derive_seeds

EXIT_OK, EXIT_INVALID, EXIT_ABORT, EXIT_INVARIANT = 0, 1, 2, 3

_TAU_TAG = 0x746175  # seed paths kept apart from the per-sample seeds
_FORWARD_TAG = 0x66776400
_FORWARD_CHAINS = 4
_ENUM_SITES = 20
_NORM_TOL = 1e-10
_BALANCE_TOL = 1e-9


# ------------------------------------------------------------------ helpers

def _write_jsonl(path: Path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _write_table(path_stem: Path, rows: list[dict], fmt: str) -> Path:
    if fmt == "json":
        path = path_stem.with_suffix(".json")
        path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
        return path
    path = path_stem.with_suffix(".csv")
    names = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        w.writerows(rows)
    return path


def _resolve(args) -> dict:
    """Load the config and apply command-line overrides before hashing."""
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["sampler"]["seed"] = args.seed
    if getattr(args, "epsilon", None) is not None:
        cfg["quantum"]["epsilon"] = args.epsilon
    return parse_config(cfg)


def _out_dir(args, cfg: dict | None) -> Path:
    out = Path(args.out if args.out is not None else (cfg or {}).get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(cfg: dict, u) -> CftpSchedule:
    s = cfg["sampler"]
    dt = s["delta_t"]
    if dt == "auto":
        dt = calibrate_delta_t(u, s["seed"], mode=s["tracked"], cap=s["cap"])
    return CftpSchedule(s["mode"], int(dt), max(int(s["cap"]), int(dt)))


def _quantum_update(cfg: dict, u):
    """The update seen by the Grover oracle; admissible-only runs wrap it around ``x_a``."""
    if cfg["sampler"]["tracked"] != "admissible-only":
        return u
    states = np.arange(u.N, dtype=np.int64)
    x_a = int(states[np.asarray(u.model.is_admissible(states))][0])
    return admissible_oracle_wrap(u, x_a)


def _observables(cfg: dict, model, x) -> dict:
    out = {}
    for name in cfg["sampler"]["observables"]:
        v = observable_fn(name, model)(np.asarray([x], dtype=np.int64))[0]
        out[name] = int(v) if float(v).is_integer() else float(v)
    return out


def _chunks(seq, k: int):
    k = max(1, min(k, len(seq)))
    bounds = np.linspace(0, len(seq), k + 1).astype(int)
    return [seq[bounds[i]:bounds[i + 1]] for i in range(k)]


# ------------------------------------------------------------ sampling

def classical_records(cfg: dict, threads: int = 1) -> list[dict]:
    """One record per sample of the classical CFTP run described by ``cfg``."""
    u = build_update(cfg)
    schedule = _schedule(cfg, u)
    s = cfg["sampler"]
    seeds = derive_seeds(s["seed"], s["R"])
    parts = _chunks(np.arange(seeds.size), threads)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        batches = list(pool.map(lambda idx: cftp_batch(u, schedule, seeds[idx], s["tracked"]), parts))
    h = config_hash(cfg)
    records = []
    for idx, b in zip(parts, batches):
        for k, i in enumerate(idx):
            records.append(_record(cfg, h, int(i), int(seeds[i]), schedule.delta_t, "classical",
                                   None if b.aborted[k] else int(b.x_c[k]), int(b.T_star[k]), u.model))
    return records


def _record(cfg, h, index, seed, delta_t, sampler, x_c, T_star, model, extra=None) -> dict:
    r = {"config_hash": h, "index": index, "seed": seed, "delta_t": delta_t, "sampler": sampler,
         "aborted": x_c is None, "T_star": T_star if x_c is not None else None, "x_c": x_c,
         "observables": _observables(cfg, model, x_c) if x_c is not None else None}
    if extra:
        r.update(extra)
    return r


def _quantum_one(cfg, h, u, uq, schedule, index, seed) -> dict:
    q = cfg["quantum"]
    kw = {"growth": q["growth"], "budget_factor": q["budget_factor"], "precheck": q["precheck"]}
    extra = {"epsilon": q["epsilon"]}
    try:
        res = quantum_cftp_sample(uq, schedule, seed, q["epsilon"], **kw)
    except CoalescenceTimeout:
        return _record(cfg, h, index, seed, schedule.delta_t, "quantum", None, -1, u.model,
                       dict(extra, ledger=None))
    return _record(cfg, h, index, seed, schedule.delta_t, "quantum", res.x_c, res.T_star, u.model,
                   dict(extra, ledger=res.ledger.as_dict()))


def quantum_records(cfg: dict, threads: int = 1) -> list[dict]:
    u = build_update(cfg)
    uq = _quantum_update(cfg, u)
    schedule = _schedule(cfg, u)
    seeds = derive_seeds(cfg["sampler"]["seed"], cfg["sampler"]["R"])
    h = config_hash(cfg)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda i: _quantum_one(cfg, h, u, uq, schedule, i, int(seeds[i])),
                             range(seeds.size)))


def replay_record(cfg: dict, record: dict, schedule: CftpSchedule | None = None) -> dict:
    """Recompute one record from its config and per-sample seed."""
    if record.get("config_hash") != config_hash(cfg):
        raise ConfigError("record was produced by a different config (hash mismatch)")
    u = build_update(cfg)
    schedule = _schedule(cfg, u) if schedule is None else schedule
    h, seed, i = record["config_hash"], int(record["seed"]), int(record["index"])
    if record["sampler"] == "quantum":
        return _quantum_one(cfg, h, u, _quantum_update(cfg, u), schedule, i, seed)
    try:
        res = cftp_sample(u, schedule, seed, cfg["sampler"]["tracked"])
    except CoalescenceTimeout:
        return _record(cfg, h, i, seed, schedule.delta_t, "classical", None, -1, u.model)
    return _record(cfg, h, i, seed, schedule.delta_t, "classical", res.x_c, res.T_star, u.model)


def summarize(cfg: dict, records: list[dict]) -> list[dict]:
    """Per-observable mean and error over the completed samples, next to the exact value."""
    u = build_update(cfg)
    done = [r for r in records if not r["aborted"]]
    rows = []
    for name in cfg["sampler"]["observables"]:
        v = np.array([r["observables"][name] for r in done], dtype=np.float64)
        exact = boltzmann_mean(u.model, observable_fn(name, u.model)) if u.n <= _ENUM_SITES else None
        R = v.size
        mean = float(v.mean()) if R else math.nan
        sd = float(v.std(ddof=1)) if R > 1 else math.nan
        err = sd / math.sqrt(R) if R > 1 else math.inf
        rows.append({"observable": name, "mean": mean, "stddev": sd, "err": err, "R": R,
                     "aborted": len(records) - R, "exact": exact})
    T = np.array([r["T_star"] for r in done], dtype=np.float64)
    rows.append({"observable": "T_star", "mean": float(T.mean()) if T.size else math.nan,
                 "stddev": float(T.std(ddof=1)) if T.size > 1 else math.nan,
                 "err": float(T.std(ddof=1) / math.sqrt(T.size)) if T.size > 1 else math.inf,
                 "R": int(T.size), "aborted": len(records) - int(T.size), "exact": None})
    return rows


def _run_sampler(args, quantum: bool) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    records = (quantum_records if quantum else classical_records)(cfg, args.threads)
    stem = "qsamples" if quantum else "samples"
    _write_jsonl(out / f"{stem}.jsonl", records)
    (out / "config.json").write_text(json.dumps({k: v for k, v in cfg.items() if k != "output"},
                                                indent=2, sort_keys=True) + "\n")
    path = _write_table(out / f"{stem}_summary", summarize(cfg, records), args.format)
    aborted = sum(r["aborted"] for r in records)
    print(f"{len(records)} records -> {out / f'{stem}.jsonl'}; summary -> {path}")
    if aborted:
        print(f"{aborted} run(s) aborted at the cap {cfg['sampler']['cap']}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_sample(args) -> int:
    return _run_sampler(args, quantum=False)


def cmd_qsample(args) -> int:
    return _run_sampler(args, quantum=True)


def cmd_replay(args) -> int:
    cfg = _resolve(args)
    lines = Path(args.records).read_text().splitlines()
    if args.line is not None:
        if not 0 <= args.line < len(lines):
            raise ConfigError(f"line {args.line} out of range (file has {len(lines)} records)")
        lines = [lines[args.line]]
    schedule = _schedule(cfg, build_update(cfg))
    bad = 0
    for line in lines:
        again = json.dumps(replay_record(cfg, json.loads(line), schedule), sort_keys=True)
        if again != line:
            bad += 1
            print(f"mismatch: {line}\n   got:   {again}", file=sys.stderr)
    print(f"replayed {len(lines)} record(s), {bad} mismatch(es)")
    return EXIT_INVARIANT if bad else EXIT_OK


# ---------------------------------------------------------------- tau

def time_scales(cfg: dict) -> dict:
    """Spectral ``tau``, mean coalescence time ``tau_hat`` and observable ``tau_O`` with the ordering checks.

    ``tau`` belongs to the random-scan kernel; ``tau_hat`` and ``tau_O`` use
    the configured site schedule.
    """
    u = build_update(cfg)
    if u.n > MAX_MATRIX_SITES:
        raise ConfigError(f"spectral path refused: n={u.n} exceeds the matrix cap of {MAX_MATRIX_SITES} sites")
    s, t = cfg["sampler"], cfg["tau"]
    P = induced_transition_matrix(u)
    stationary_distribution(P)  # surfaces degenerate chains
    gap, tau = spectral_gap(P)
    est = estimate_coalescence_time(u, CftpSchedule("additive", 1, s["cap"]),
                                    derive_seeds(s["seed"], t["runs"], _TAU_TAG), s["tracked"])
    obs = observable_fn(t["observable"], u.model)
    fits = []
    for k in range(_FORWARD_CHAINS):
        st = forward_mcmc(u, 0, t["forward_steps"], obs, derive_seed(s["seed"], _FORWARD_TAG, k))
        fits.append(st.tau_obs if st.tau_obs is not None else math.nan)
    fits = np.array(fits)
    tau_obs = float(np.nanmean(fits)) if np.isfinite(fits).any() else math.nan
    tau_obs_se = float(np.nanstd(fits, ddof=1) / math.sqrt(np.isfinite(fits).sum())) \
        if np.isfinite(fits).sum() > 1 else math.nan
    bound = est.tau_hat * (1.0 + math.log(u.N))
    return {
        "N": u.N, "schedule": u.schedule, "spectral_kernel": "random-scan",
        "tau": tau, "gap": gap,
        "tau_hat": est.tau_hat, "tau_hat_stderr": est.stderr, "tau_hat_ci95": list(est.ci95),
        "tau_hat_runs": est.runs, "tau_hat_aborted": est.aborted,
        "tau_obs": tau_obs, "tau_obs_stderr": tau_obs_se, "observable": t["observable"],
        "tau_obs_le_tau": bool(tau_obs <= tau * (1.0 + t["tol"])),
        "tau_le_tau_hat_bound": bool(tau <= bound), "tau_hat_bound": bound,
    }


def cmd_tau(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    report = dict(time_scales(cfg), config_hash=config_hash(cfg), seed=cfg["sampler"]["seed"])
    if args.format == "json":
        (out / "tau.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        _write_table(out / "tau", [{k: v for k, v in report.items() if not isinstance(v, list)}], "csv")
    print(json.dumps(report, indent=2, sort_keys=True))
    ok = report["tau_obs_le_tau"] and report["tau_le_tau_hat_bound"]
    return EXIT_OK if ok else EXIT_INVARIANT


# ------------------------------------------------------------ qdetect

def load_map(path) -> np.ndarray:
    """Map file: a JSON array of ``N`` integers in ``[0, N)`` (or ``{"map": [...]}``)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read map file {path}: {exc}") from exc
    if isinstance(doc, dict):
        if set(doc) != {"map"}:
            raise ConfigError("map object must have the single key 'map'")
        doc = doc["map"]
    if not isinstance(doc, list) or not doc or not all(isinstance(v, int) and not isinstance(v, bool)
                                                       for v in doc):
        raise ConfigError("map must be a non-empty array of integers")
    images = np.asarray(doc, dtype=np.int64)
    if images.min() < 0 or images.max() >= images.size:
        raise ConfigError(f"map entries must lie in [0, {images.size})")
    return images


def detection_report(images, seed: int, epsilon: float, T: int | None = None, precheck: int = 8,
                     growth: float | None = None, budget_factor: float | None = None) -> dict:
    """Detection on ``images``; a bare map (``T=None``) charges one gate per oracle call."""
    kw = {k: v for k, v in (("growth", growth), ("budget_factor", budget_factor)) if v is not None}
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    rnd = verdict_from_images(images, 0 if T is None else T, rng, epsilon, precheck,
                              step_cost=1 if T is None else None, **kw)
    M = int(np.count_nonzero(np.asarray(images) != rnd.y1))
    return {"N": int(len(images)), "M": M, "T": T, "y1": rnd.y1,
            "oracle_calls": rnd.ledger.oracle_calls, "found": rnd.witness,
            "verdict": "coalesced" if rnd.report.coalesced else "noncoalesced",
            "detected_by": None if rnd.report.coalesced else ("grover" if rnd.witness is not None else "precheck"),
            "epsilon": epsilon, "seed": int(seed), "ledger": rnd.ledger.as_dict()}


def cmd_qdetect(args) -> int:
    if (args.map is None) == (args.config is None):
        raise ConfigError("qdetect needs exactly one of --map or --config")
    if args.map is not None:
        images = load_map(args.map)
        eps = 1e-3 if args.epsilon is None else args.epsilon
        if not 0 < eps < 1:
            raise ConfigError("epsilon must lie strictly between 0 and 1")
        seed = 0 if args.seed is None else args.seed
        report = detection_report(images, seed, eps)
        report["map_file"] = str(args.map)
        cfg = None
    else:
        cfg = _resolve(args)
        u = build_update(cfg)
        T = args.lookback if args.lookback is not None else \
            (cfg["sampler"]["delta_t"] if cfg["sampler"]["delta_t"] != "auto" else 1)
        seed = cfg["sampler"]["seed"]
        uq = _quantum_update(cfg, u)
        images = evolve(uq, RngStream(seed), T, tracked_starts(uq, "full"))
        q = cfg["quantum"]
        report = detection_report(images, derive_seed(seed, T), q["epsilon"], T, q["precheck"],
                                  q["growth"], q["budget_factor"])
        report["config_hash"] = config_hash(cfg)
    out = _out_dir(args, cfg)
    _write_jsonl(out / "qdetect.jsonl", [report])
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# -------------------------------------------------------------- bench

def cmd_bench(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg)
    b, q, s = cfg["bench"], cfg["quantum"], cfg["sampler"]
    grid = [(N, M) for N in b["N"] for M in b["M"]]
    records, summary = run_benchmark(grid, b["trials"], s["seed"], q["epsilon"])
    if b["cftp_trials"]:
        u = build_update(cfg)
        recs, survivors = run_cftp_benchmark(u, "model", b["cftp_trials"], _schedule(cfg, u),
                                             s["seed"], q["epsilon"])
        records += recs
        values, counts = np.unique(survivors, return_counts=True)
        summary["end_to_end"] = {
            "mean_T_star": float(np.mean([r.T_star for r in recs])),
            "mean_oracle_calls": float(np.mean([r.quantum_oracle_calls for r in recs])),
            "mean_classical_ops": float(np.mean([r.classical_ops for r in recs])),
            "M_histogram": {str(int(v)): int(c) for v, c in zip(values, counts)},
        }
    summary["config_hash"] = config_hash(cfg)
    write_records_csv(records, out / "bench.csv")
    (out / "bench_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    ok = all(v["classical_pass"] and v["quantum_pass"] for v in summary["per_M"].values())
    return EXIT_OK if ok and summary["multiplier_pass"] else EXIT_INVARIANT


# ----------------------------------------------------------- validate

def _row(check: str, status: str, detail: str = "") -> dict:
    return {"check": check, "status": status, "detail": detail}


def validate_update(u, seed: int = 0, trials: int = 2000) -> list[dict]:
    """Invariant suite for a coupled update; each row is ``pass``, ``FAIL`` or ``skipped``."""
    rows = []
    small = u.n <= MAX_MATRIX_SITES
    why = f"n={u.n} exceeds the matrix cap of {MAX_MATRIX_SITES} sites"
    if small:
        P = induced_transition_matrix(u)
        pi = gibbs_distribution(u.model)
        dev = float(np.max(np.abs(P.sum(axis=0) - 1.0)))
        rows.append(_row("stochastic columns", "pass" if dev <= 1e-12 else "FAIL", f"max deviation {dev:.2e}"))
        flow = P * pi[None, :]
        db = float(np.max(np.abs(flow - flow.T)))
        rows.append(_row("detailed balance", "pass" if check_detailed_balance(P, pi, _BALANCE_TOL) else "FAIL",
                         f"max flux asymmetry {db:.2e}"))
        worst = max(float(np.max(np.abs(site_transition_matrix(u, i) @ pi - pi))) for i in range(u.n))
        rows.append(_row("marginal correctness", "pass" if worst <= _BALANCE_TOL else "FAIL",
                         f"max |P_i pi - pi| {worst:.2e} over sites"))
        other = dataclasses.replace(u, coupling="flip" if u.coupling == "heat-bath" else "heat-bath")
        diff = float(np.max(np.abs(P - induced_transition_matrix(other))))
        rows.append(_row("coupling equivalence", "pass" if diff <= 1e-12 else "FAIL",
                         f"max |P_heat-bath - P_flip| {diff:.2e}"))
    else:
        for name in ("stochastic columns", "detailed balance", "marginal correctness", "coupling equivalence"):
            rows.append(_row(name, "skipped", why))

    rng = np.random.default_rng(seed)
    if isinstance(u.model, IsingModel):
        x = rng.integers(0, u.N, size=trials)
        i = rng.integers(0, u.n, size=trials)
        flipped = x ^ (np.int64(1) << i)
        de = np.array([u.model.delta_energy(int(a), int(b)) for a, b in zip(x, i)])
        gap = float(np.max(np.abs(de - (u.model.energy(flipped) - u.model.energy(x)))))
        rows.append(_row("local energy difference", "pass" if gap <= 1e-9 else "FAIL", f"max error {gap:.2e}"))
    if u.monotone:
        x = rng.integers(0, u.N, size=trials)
        y = x | rng.integers(0, u.N, size=trials)
        i = rng.integers(0, u.n, size=trials)
        a = rng.random(trials)
        fx = np.array([u.apply(int(p), int(s), float(al)) for p, s, al in zip(x, i, a)])
        fy = np.array([u.apply(int(p), int(s), float(al)) for p, s, al in zip(y, i, a)])
        bad = int(np.count_nonzero(fx & ~fy))
        rows.append(_row("monotonicity", "pass" if bad == 0 else "FAIL", f"{bad} order violations in {trials}"))
    else:
        rows.append(_row("monotonicity", "skipped", "coupling is not monotone"))
    if not isinstance(u.model, IsingModel):
        adm = np.arange(u.N, dtype=np.int64)[np.asarray(u.model.is_admissible(np.arange(u.N)))] \
            if u.n <= _ENUM_SITES else None
        if adm is None:
            rows.append(_row("admissibility preserved", "skipped", f"n={u.n} too large to enumerate"))
        else:
            ok = all(np.all(u.model.is_admissible(u.apply(adm, i, al)))
                     for i in range(u.n) for al in rng.random(16))
            rows.append(_row("admissibility preserved", "pass" if ok else "FAIL", f"{adm.size} admissible states"))

    if u.n <= _ENUM_SITES:
        images = evolve(u, RngStream(seed), u.n, tracked_starts(u, "full", 2**_ENUM_SITES))
        prob = DetectionProblem(images, int(images[0]))
        state = uniform_over(u.N)
        worst = 0.0
        for _ in range(16):
            state = oracle_phase_flip(state, prob)
            worst = max(worst, abs(float(np.linalg.norm(state)) - 1.0))
            state = diffusion(state)
            worst = max(worst, abs(float(np.linalg.norm(state)) - 1.0))
        rows.append(_row("norm preservation", "pass" if worst <= _NORM_TOL else "FAIL",
                         f"max norm drift {worst:.2e}"))
    else:
        rows.append(_row("norm preservation", "skipped", f"n={u.n} too large for the statevector"))
    return rows


def validate_matrix(P) -> list[dict]:
    rows = []
    dev = float(np.max(np.abs(np.asarray(P).sum(axis=0) - 1.0)))
    rows.append(_row("stochastic columns", "pass" if dev <= 1e-12 else "FAIL", f"max deviation {dev:.2e}"))
    try:
        pi = stationary_distribution(P)
    except DegenerateChainError as exc:
        rows.append(_row("unique stationary distribution", "FAIL", str(exc)))
        return rows
    rows.append(_row("unique stationary distribution", "pass", f"min weight {pi.min():.3e}"))
    rows.append(_row("detailed balance", "pass" if check_detailed_balance(P, pi, _BALANCE_TOL) else "FAIL",
                     "against the stationary distribution"))
    gap, tau = spectral_gap(P)
    rows.append(_row("spectral gap", "pass" if gap > 0 else "FAIL", f"gap {gap:.6g}, tau {tau:.6g}"))
    return rows


def _print_table(rows: list[dict]) -> None:
    w = max(len(r["check"]) for r in rows)
    for r in rows:
        print(f"{r['check']:<{w}}  {r['status']:<7}  {r['detail']}")


def cmd_validate(args) -> int:
    if (args.matrix is None) == (args.config is None):
        raise ConfigError("validate needs exactly one of --config or --matrix")
    if args.matrix is not None:
        try:
            rows = validate_matrix(load_matrix(args.matrix))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read matrix file {args.matrix}: {exc}") from exc
        cfg = None
    else:
        cfg = _resolve(args)
        rows = validate_update(build_update(cfg), cfg["sampler"]["seed"])
    _print_table(rows)
    skipped = [r["check"] for r in rows if r["status"] == "skipped"]
    if skipped:
        print("skipped: " + ", ".join(skipped))
    _write_table(_out_dir(args, cfg) / "validate", rows, args.format)
    return EXIT_INVARIANT if any(r["status"] == "FAIL" for r in rows) else EXIT_OK


# -------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exactmc", description="Exact sampling by coupling from the past, "
                                "with a simulated Grover coalescence detector.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="override sampler.seed")
        sp.add_argument("--out", help="output directory (default: output.dir of the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("--format", choices=("json", "csv"), default="csv", help="summary table format")
        return sp

    common(sub.add_parser("sample", help="classical CFTP samples")).set_defaults(func=cmd_sample)
    sp = common(sub.add_parser("qsample", help="CFTP with the Grover coalescence verdict"))
    sp.add_argument("--epsilon", type=float, help="override quantum.epsilon")
    sp.set_defaults(func=cmd_qsample)
    common(sub.add_parser("tau", help="time-scale report")).set_defaults(func=cmd_tau)
    sp = common(sub.add_parser("qdetect", help="Grover detection on a map"), config_required=False)
    sp.add_argument("--map", help="JSON array of N integers in [0, N)")
    sp.add_argument("--epsilon", type=float, help="failure bound of a coalesced verdict")
    sp.add_argument("--lookback", type=int, help="T for the model map G_T (with --config)")
    sp.set_defaults(func=cmd_qdetect)
    common(sub.add_parser("bench", help="detection scaling benchmark")).set_defaults(func=cmd_bench)
    sp = common(sub.add_parser("validate", help="invariant suite"), config_required=False)
    sp.add_argument("--matrix", help="transition matrix JSON file")
    sp.set_defaults(func=cmd_validate)
    sp = common(sub.add_parser("replay", help="recompute and compare earlier records"))
    sp.add_argument("--records", required=True, help="JSON-lines file written by sample or qsample")
    sp.add_argument("--line", type=int, help="replay only this zero-based record")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (ConfigError, FitError, DegenerateChainError, NotMonotoneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CoalescenceTimeout as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
