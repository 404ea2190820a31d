"""Counter-based keyed uniforms indexed by (seed, time, lane).

Coupling from the past revisits arbitrary negative time indices, so the
uniform used at step ``t`` has to be a pure function of ``(seed, t, lane)``
rather than the next draw of a stateful generator. Each value is produced by
keyed SplitMix64 finalizer rounds applied to a packed counter; every stage is
a bijection on 64-bit words, so distinct counters never collide for a fixed
key.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)
_KEY2 = _U64(0xD1B54A32D192ED03)

LANE_BITS = 16
MAX_LANE = (1 << LANE_BITS) - 1
MAX_TIME = (1 << (64 - LANE_BITS)) - 1

#: lane carrying the uniform that drives the site update
LANE_UPDATE = 0
#: lane carrying the uniform that picks a site under random-site scheduling
LANE_SITE = 1


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


def _as_u64(value) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind == "O" or (arr.dtype.kind in "iu" and arr.size and int(arr.min()) < 0):
        raise ValueError("seeds must be non-negative 64-bit integers")
    return arr.astype(np.uint64)


def derive_seed(seed: int, *path: int) -> int:
    """Deterministically derive a child seed from ``seed`` and an index path."""
    with np.errstate(over="ignore"):
        z = _mix64(_as_u64(seed) + _GOLDEN)
        for p in path:
            z = _mix64(z ^ _mix64(_as_u64(p) * _GOLDEN + _KEY2))
    return int(z)


def derive_seeds(seed: int, count: int, *path: int) -> np.ndarray:
    """``count`` child seeds ``derive_seed(seed, *path, k)`` for ``k < count``, as uint64."""
    with np.errstate(over="ignore"):
        z = _mix64(_as_u64(seed) + _GOLDEN)
        for p in path:
            z = _mix64(z ^ _mix64(_as_u64(p) * _GOLDEN + _KEY2))
        k = np.arange(count, dtype=np.uint64)
        return _mix64(z ^ _mix64(k * _GOLDEN + _KEY2))


class RngStream:
    """Random-access uniforms for one seed or a batch of seeds.

    ``alpha(t, lane)`` has shape ``seeds.shape`` for scalar ``t``; with an
    array ``t`` the result broadcasts ``seeds[..., None]`` against ``t``
    when a batch is held, or has ``t``'s shape for a single seed.
    """

    def __init__(self, seed):
        self.seeds = _as_u64(seed)
        if self.seeds.ndim > 1:
            raise ValueError("seed must be a scalar or a 1-d array")
        with np.errstate(over="ignore"):
            self._key = _mix64(self.seeds + _GOLDEN)
            self._key2 = _mix64(self._key ^ _KEY2)

    @property
    def batch(self) -> int:
        return 1 if self.seeds.ndim == 0 else int(self.seeds.shape[0])

    def subset(self, index) -> "RngStream":
        return RngStream(self.seeds[index])

    def alpha(self, t, lane: int = LANE_UPDATE) -> np.ndarray:
        t_arr = np.asarray(t, dtype=np.int64)
        if np.any(t_arr >= 0):
            raise ValueError("time indices must be negative (randomness is indexed into the past)")
        if np.any(-t_arr > MAX_TIME):
            raise ValueError("time index out of range")
        if not 0 <= lane <= MAX_LANE:
            raise ValueError(f"lane must lie in [0, {MAX_LANE}]")
        counter = ((-t_arr).astype(np.uint64) << _U64(LANE_BITS)) | _U64(lane)
        key, key2 = self._key, self._key2
        if self.seeds.ndim == 1 and t_arr.ndim > 0:
            key = key[:, None]
            key2 = key2[:, None]
        with np.errstate(over="ignore"):
            z = _mix64(counter ^ key)
            z = _mix64(z + key2)
        return (z >> _U64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def rng_alpha(stream: RngStream, t: int, substep: int = LANE_UPDATE) -> float:
    """Scalar convenience wrapper around :meth:`RngStream.alpha` for a single seed."""
    if stream.seeds.ndim != 0:
        raise ValueError("rng_alpha expects a single-seed stream")
    return float(stream.alpha(t, substep))
