"""Run configuration: strict JSON parsing, defaults and the canonical hash.

A config is a JSON object with the blocks ``model``, ``sampler``,
``quantum``, ``tau``, ``bench`` and ``output``; every block is optional on
disk and filled with defaults, except ``model``, which stays ``None`` when
absent (only ``bench`` without end-to-end trials runs without a model).
Any key not listed in :data:`DEFAULTS` is an error.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .cftp import DEFAULT_CAP, TRACKED_MODES
from .grover import BUDGET_FACTOR, DEFAULT_EPSILON, GROWTH, PRECHECK_MEASUREMENTS
from .models import (COUPLINGS, SCHEDULES, CoupledUpdate, HardCoreModel, IsingModel, build_lattice,
                     magnetization)

LATTICES = ("chain", "cycle", "square-open", "square-periodic", "edges")
OBSERVABLES = ("magnetization", "energy", "occupation")

DEFAULTS = {
    "model": {
        "kind": "ising", "lattice": "chain", "n": None, "rows": None, "cols": None, "edges": None,
        "J": 1.0, "h": 0.0, "beta": 1.0, "fugacity": 1.0,
        "coupling": "heat-bath", "schedule": "sequential",
    },
    "sampler": {
        "mode": "doubling", "delta_t": 1, "cap": DEFAULT_CAP, "tracked": "full",
        "R": 1000, "seed": 0, "observables": ["magnetization"],
    },
    "quantum": {
        "epsilon": DEFAULT_EPSILON, "budget_factor": BUDGET_FACTOR, "growth": GROWTH,
        "precheck": PRECHECK_MEASUREMENTS,
    },
    "tau": {"runs": 10_000, "forward_steps": 200_000, "observable": "magnetization", "tol": 0.2},
    "bench": {"N": [64, 256, 1024, 4096, 16384], "M": [1], "trials": 200, "cftp_trials": 0},
    "output": {"dir": "out"},
}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _fail(msg: str):
    raise ConfigError(msg)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _merge(raw: dict) -> dict:
    if not isinstance(raw, dict):
        _fail("config must be a JSON object")
    cfg = copy.deepcopy(DEFAULTS)
    if raw.get("model") is None:
        cfg["model"] = None
    for block, body in raw.items():
        if block == "model" and body is None:
            continue
        if block not in DEFAULTS:
            _fail(f"unknown config block {block!r} (expected one of {sorted(DEFAULTS)})")
        if not isinstance(body, dict):
            _fail(f"block {block!r} must be an object")
        for key, value in body.items():
            if key not in DEFAULTS[block]:
                _fail(f"unknown key {block}.{key} (expected one of {sorted(DEFAULTS[block])})")
            cfg[block][key] = value
    return cfg


def _check_model(m: dict) -> None:
    if m["kind"] not in ("ising", "hardcore"):
        _fail("model.kind must be 'ising' or 'hardcore'")
    if m["lattice"] not in LATTICES:
        _fail(f"model.lattice must be one of {LATTICES}")
    if m["lattice"] in ("square-open", "square-periodic"):
        if not (_is_int(m["rows"]) and _is_int(m["cols"]) and m["rows"] >= 1 and m["cols"] >= 1):
            _fail("square lattices need positive integer model.rows and model.cols")
    elif not (_is_int(m["n"]) and m["n"] >= 1):
        _fail("model.n must be a positive integer")
    if m["lattice"] == "edges":
        e = m["edges"]
        if not isinstance(e, list) or not all(isinstance(p, list) and len(p) == 2 and all(map(_is_int, p))
                                              for p in e):
            _fail("model.edges must be a list of [i, j] integer pairs")
    for key in ("J", "h", "beta", "fugacity"):
        if not _is_num(m[key]):
            _fail(f"model.{key} must be a finite number")
    if m["beta"] < 0:
        _fail("model.beta must be non-negative")
    if m["fugacity"] <= 0:
        _fail("model.fugacity must be positive")
    if m["coupling"] not in COUPLINGS:
        _fail(f"model.coupling must be one of {COUPLINGS}")
    if m["schedule"] not in SCHEDULES:
        _fail(f"model.schedule must be one of {SCHEDULES}")


def _check_sampler(s: dict, kind: str) -> None:
    if s["mode"] not in ("additive", "doubling"):
        _fail("sampler.mode must be 'additive' or 'doubling'")
    if s["delta_t"] != "auto" and not (_is_int(s["delta_t"]) and s["delta_t"] >= 1):
        _fail("sampler.delta_t must be a positive integer or 'auto'")
    if not (_is_int(s["cap"]) and s["cap"] >= 1):
        _fail("sampler.cap must be a positive integer")
    if _is_int(s["delta_t"]) and s["cap"] < s["delta_t"]:
        _fail("sampler.cap must be at least sampler.delta_t")
    if s["tracked"] not in TRACKED_MODES:
        _fail(f"sampler.tracked must be one of {TRACKED_MODES}")
    if not (_is_int(s["R"]) and s["R"] >= 1):
        _fail("sampler.R must be a positive integer")
    if not (_is_int(s["seed"]) and 0 <= s["seed"] < 2**64):
        _fail("sampler.seed must be an integer in [0, 2**64)")
    obs = s["observables"]
    if not isinstance(obs, list) or any(o not in OBSERVABLES for o in obs):
        _fail(f"sampler.observables must be a list drawn from {OBSERVABLES}")
    if kind == "hardcore" and "energy" in obs:
        _fail("observable 'energy' is defined for Ising models only")


def _check_quantum(q: dict) -> None:
    if not (_is_num(q["epsilon"]) and 0 < q["epsilon"] < 1):
        _fail("quantum.epsilon must lie strictly between 0 and 1")
    if not (_is_num(q["budget_factor"]) and q["budget_factor"] > 0):
        _fail("quantum.budget_factor must be positive")
    if not (_is_num(q["growth"]) and 1 < q["growth"] < 4 / 3):
        _fail("quantum.growth must lie in (1, 4/3)")
    if not (_is_int(q["precheck"]) and q["precheck"] >= 1):
        _fail("quantum.precheck must be a positive integer")


def _check_rest(cfg: dict) -> None:
    t = cfg["tau"]
    if not (_is_int(t["runs"]) and t["runs"] >= 1):
        _fail("tau.runs must be a positive integer")
    if not (_is_int(t["forward_steps"]) and t["forward_steps"] >= 2):
        _fail("tau.forward_steps must be an integer >= 2")
    if t["observable"] not in OBSERVABLES:
        _fail(f"tau.observable must be one of {OBSERVABLES}")
    if not (_is_num(t["tol"]) and t["tol"] >= 0):
        _fail("tau.tol must be non-negative")
    b = cfg["bench"]
    if not (isinstance(b["N"], list) and b["N"] and all(_is_int(v) and v >= 2 for v in b["N"])):
        _fail("bench.N must be a non-empty list of integers >= 2")
    if not (isinstance(b["M"], list) and b["M"]
            and all((_is_int(v) and v >= 1) or v == "N/2" for v in b["M"])):
        _fail("bench.M must be a non-empty list of positive integers or 'N/2'")
    if not (_is_int(b["trials"]) and b["trials"] >= 1):
        _fail("bench.trials must be a positive integer")
    if not (_is_int(b["cftp_trials"]) and b["cftp_trials"] >= 0):
        _fail("bench.cftp_trials must be a non-negative integer")
    if not isinstance(cfg["output"]["dir"], str):
        _fail("output.dir must be a string")


def parse_config(raw: dict) -> dict:
    """Merge ``raw`` over the defaults and validate every field.

    Raises
    ------
    ConfigError
        On unknown blocks or keys, wrong types, or out-of-range values.
    """
    cfg = _merge(raw)
    if cfg["model"] is not None:
        _check_model(cfg["model"])
    _check_sampler(cfg["sampler"], cfg["model"]["kind"] if cfg["model"] else None)
    _check_quantum(cfg["quantum"])
    _check_rest(cfg)
    if cfg["model"] is not None:
        try:
            build_update(cfg)
        except ValueError as exc:
            _fail(f"invalid model: {exc}")
    return cfg


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        _fail(f"config file {path} not found")
    except json.JSONDecodeError as exc:
        _fail(f"config file {path} is not valid JSON: {exc}")
    return parse_config(raw)


def canonical_json(cfg: dict) -> str:
    """Sorted, whitespace-free JSON of the resolved config without its ``output`` block."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """SHA-256 of :func:`canonical_json`; where results are written does not change it."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def build_model(cfg: dict):
    m = cfg["model"]
    if m is None:
        raise ConfigError("this command needs a model block in the config")
    lattice = build_lattice(m["lattice"], m["n"], m["rows"], m["cols"], m["edges"])
    if m["kind"] == "ising":
        return IsingModel(lattice, float(m["J"]), float(m["h"]), float(m["beta"]))
    return HardCoreModel(lattice, float(m["fugacity"]))


def build_update(cfg: dict) -> CoupledUpdate:
    m = cfg["model"]
    return CoupledUpdate(build_model(cfg), m["coupling"], m["schedule"])


def observable_fn(name: str, model):
    """Vectorised observable over integer-coded states."""
    if name == "magnetization":
        return lambda x: magnetization(x, model.n)
    if name == "occupation":
        return lambda x: np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)
    if name == "energy":
        if not isinstance(model, IsingModel):
            raise ConfigError("observable 'energy' is defined for Ising models only")
        return lambda x: np.asarray(model.energy(np.asarray(x, dtype=np.int64)), dtype=np.float64)
    raise ConfigError(f"unknown observable {name!r}")
