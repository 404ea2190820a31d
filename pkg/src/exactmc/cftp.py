"""Coupling from the past over coupled single-site updates.

The lookback loop reuses the same past uniforms on every round (they are
addressed by time index through :class:`~exactmc.rng.RngStream`), and each
round recomputes ``G_T = f_-1 o ... o f_-T`` from scratch on the tracked
start states. Batched entry points evolve many seeds at once; for a given
seed they return exactly what the single-seed functions return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .rng import RngStream, derive_seeds

TRACKED_MODES = ("full", "extremal-pair", "admissible-only")
DEFAULT_CAP = 2**20
DEFAULT_STATE_CAP = 2**16
PROBE_RUNS = 8
_PROBE_TAG = 0x70726F6265  # "probe"
_BATCH_ELEMENTS = 2**20


class CoalescenceTimeout(RuntimeError):
    """The lookback exceeded the schedule cap before the tracked histories met."""


class NotMonotoneError(ValueError):
    pass


@dataclass(frozen=True)
class CftpSchedule:
    """Lookback sequence: ``additive`` grows ``T`` by ``delta_t``, ``doubling`` doubles it."""

    mode: str = "doubling"
    delta_t: int = 1
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.mode not in ("additive", "doubling"):
            raise ValueError("schedule mode must be 'additive' or 'doubling'")
        if self.delta_t < 1:
            raise ValueError("delta_t must be at least 1")
        if self.cap < self.delta_t:
            raise ValueError("cap must be at least delta_t")

    def lookbacks(self) -> Iterator[int]:
        """``0`` followed by the growing lookbacks, stopping at the cap."""
        yield 0
        T = self.delta_t
        while T <= self.cap:
            yield T
            T = T + self.delta_t if self.mode == "additive" else 2 * T


@dataclass(frozen=True)
class CoalescenceReport:
    T: int
    coalesced: bool
    survivors: int
    x_c: int | None
    tracked_mode: str

    def __post_init__(self):
        if self.coalesced != (self.survivors == 1):
            raise ValueError("coalesced must coincide with a single surviving value")
        if (self.x_c is not None) != self.coalesced:
            raise ValueError("x_c is present exactly when coalesced")


@dataclass(frozen=True)
class CftpResult:
    x_c: int
    T_star: int


@dataclass
class CftpBatch:
    seeds: np.ndarray
    x_c: np.ndarray
    T_star: np.ndarray
    aborted: np.ndarray


@dataclass(frozen=True)
class CoalescenceTimeEstimate:
    tau_hat: float
    stderr: float
    runs: int
    aborted: int
    ci95: tuple[float, float]


def tracked_starts(u, mode: str = "full", state_cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """Start states followed by ``Pi(T)`` in the given tracking mode."""
    if mode not in TRACKED_MODES:
        raise ValueError(f"tracked mode must be one of {TRACKED_MODES}")
    if mode == "extremal-pair":
        if not u.monotone:
            raise NotMonotoneError("extremal-pair tracking needs a monotone coupling "
                                   "(heat-bath on a ferromagnetic Ising model)")
        return np.asarray(u.prepare(np.array([0, u.N - 1], dtype=np.int64)), dtype=np.int64)
    if u.N > state_cap:
        raise ValueError(f"{mode} tracking of N={u.N} states exceeds the cap {state_cap}")
    x = np.arange(u.N, dtype=np.int64)
    if mode == "admissible-only":
        ok = np.asarray(u.model.is_admissible(x))
        if not ok.any():
            raise ValueError("model has no admissible state")
        x = np.where(ok, x, x[ok][0])
    return np.asarray(u.prepare(x), dtype=np.int64)


def evolve(u, stream: RngStream, T: int, starts) -> np.ndarray:
    """Apply ``G_T`` to ``starts``; the result gains a leading batch axis for batched streams."""
    if T < 0:
        raise ValueError("lookback must be non-negative")
    X = np.asarray(starts, dtype=np.int64)
    if stream.seeds.ndim == 1:
        X = np.broadcast_to(X, (stream.batch,) + X.shape).copy()
    for t in range(-T, 0):
        X = u.step(X, t, stream)
    return X


def apply_G(u, stream: RngStream, T: int, x: int) -> int:
    """``G_T(x) = f_-1 o ... o f_-T (x)`` for a single seed, after the update's start remap."""
    start = np.asarray(u.prepare(np.array([x], dtype=np.int64)), dtype=np.int64)
    return int(evolve(u, stream, T, start)[0])


def _report(X: np.ndarray, T: int, mode: str) -> CoalescenceReport:
    values = np.unique(X)
    co = values.size == 1
    return CoalescenceReport(T, co, int(values.size), int(values[0]) if co else None, mode)


def pi_subroutine(u, stream: RngStream, T: int, mode: str = "full",
                  state_cap: int = DEFAULT_STATE_CAP) -> CoalescenceReport:
    """Follow every tracked history from ``-T`` to ``0`` and test coalescence."""
    starts = tracked_starts(u, mode, state_cap)
    return _report(evolve(u, stream, T, starts), T, mode)


def cftp_sample(u, schedule: CftpSchedule, seed: int, mode: str = "full", *,
                stream: RngStream | None = None, state_cap: int = DEFAULT_STATE_CAP,
                on_round: Callable[[int, np.ndarray], None] | None = None) -> CftpResult:
    """Exact equilibrium sample by coupling from the past.

    Raises
    ------
    CoalescenceTimeout
        If no lookback up to ``schedule.cap`` coalesces the tracked states.
    """
    stream = RngStream(seed) if stream is None else stream
    starts = tracked_starts(u, mode, state_cap)
    last = None
    for T in schedule.lookbacks():
        X = evolve(u, stream, T, starts)
        if on_round is not None:
            on_round(T, X)
        last = _report(X, T, mode)
        if last.coalesced:
            return CftpResult(last.x_c, T)
    raise CoalescenceTimeout(
        f"no coalescence by T={last.T} (cap {schedule.cap}); {last.survivors} distinct values "
        f"remain among {starts.size} tracked histories; raise the cap if the chain is slowly mixing"
    )


def monotone_cftp_sample(u, schedule: CftpSchedule, seed: int, **kw) -> CftpResult:
    """CFTP following only the all-down and all-up histories."""
    if not u.monotone:
        raise NotMonotoneError("monotone CFTP refused: coupling is not monotone")
    return cftp_sample(u, schedule, seed, "extremal-pair", **kw)


def cftp_batch(u, schedule: CftpSchedule, seeds, mode: str = "full",
               state_cap: int = DEFAULT_STATE_CAP) -> CftpBatch:
    """:func:`cftp_sample` for many seeds; aborted runs get ``T_star = -1``."""
    seeds = np.asarray(seeds, dtype=np.uint64).ravel()
    starts = tracked_starts(u, mode, state_cap)
    R = seeds.size
    x_c = np.full(R, -1, dtype=np.int64)
    t_star = np.full(R, -1, dtype=np.int64)
    chunk = max(1, _BATCH_ELEMENTS // max(1, starts.size))
    for lo in range(0, R, chunk):
        pending = np.arange(lo, min(R, lo + chunk))
        for T in schedule.lookbacks():
            if pending.size == 0:
                break
            X = evolve(u, RngStream(seeds[pending]), T, starts)
            co = np.all(X == X[:, :1], axis=1)
            x_c[pending[co]] = X[co, 0]
            t_star[pending[co]] = T
            pending = pending[~co]
    return CftpBatch(seeds, x_c, t_star, t_star < 0)


def calibrate_delta_t(u, seed: int, probes: int = PROBE_RUNS, mode: str = "full",
                      cap: int = DEFAULT_CAP, state_cap: int = DEFAULT_STATE_CAP) -> int:
    """Median minimal coalescence time over ``probes`` warm-up runs.

    Warm-up seeds are derived from ``seed`` on a separate path, so they never
    coincide with per-sample seeds.
    """
    probe_seeds = derive_seeds(seed, probes, _PROBE_TAG)
    batch = cftp_batch(u, CftpSchedule("additive", 1, cap), probe_seeds, mode, state_cap)
    done = batch.T_star[~batch.aborted]
    if done.size == 0:
        raise CoalescenceTimeout(f"no warm-up probe coalesced within cap {cap}")
    return max(1, int(math.ceil(np.median(done))))


def estimate_coalescence_time(u, schedule: CftpSchedule, seeds, mode: str = "full",
                              state_cap: int = DEFAULT_STATE_CAP) -> CoalescenceTimeEstimate:
    """Mean coalescence lookback over independent seeds; aborted runs are excluded and counted."""
    batch = cftp_batch(u, schedule, seeds, mode, state_cap)
    T = batch.T_star[~batch.aborted].astype(np.float64)
    if T.size == 0:
        raise CoalescenceTimeout("every run aborted")
    mean = float(T.mean())
    if T.size < 2:
        return CoalescenceTimeEstimate(mean, math.inf, 1, int(batch.aborted.sum()), (-math.inf, math.inf))
    se = float(T.std(ddof=1) / math.sqrt(T.size))
    return CoalescenceTimeEstimate(mean, se, int(T.size), int(batch.aborted.sum()),
                                   (mean - 1.96 * se, mean + 1.96 * se))
