"""Observable averages: over independent exact samples, or along one forward chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import spectral_gap
from .models import MAX_MATRIX_SITES, induced_transition_matrix
from .rng import LANE_SITE, LANE_UPDATE, RngStream

BURN_IN_FACTOR = 10
#: correlation time assigned when no correlation survives one lag; it is the
#: value for which the forward error reduces to the independent-sample error
MIN_TAU = 0.5
PILOT_STEPS = 10_000


@dataclass
class ObservableStats:
    mean: float
    stddev: float
    err: float
    R: int | None = None
    T: int | None = None
    tau_obs: float | None = None
    tau_fit: float | None = None
    autocorr: np.ndarray | None = field(default=None, repr=False)
    flags: tuple[str, ...] = ()

    @property
    def reliable(self) -> bool:
        return not self.flags


def observable_mean(samples, observable=None) -> ObservableStats:
    """Average over independent realizations with ``err = stddev / sqrt(R)``.

    ``observable`` maps an array of states to values; when omitted the
    samples are taken to be observable values already.
    """
    s = np.asarray(samples)
    if s.size == 0:
        raise ValueError("no samples")
    v = np.asarray(observable(s) if observable is not None else s, dtype=np.float64).ravel()
    R = v.size
    if R < 2:
        return ObservableStats(float(v[0]), math.nan, math.inf, R=R, flags=("single realization",))
    sd = float(v.std(ddof=1))
    return ObservableStats(float(v.mean()), sd, sd / math.sqrt(R), R=R)


def autocorrelation(values, max_lag: int) -> np.ndarray:
    """``C(s) = <O(t+s) O(t)>_t - <O>^2`` for ``s = 0..max_lag`` (FFT, biased normalisation)."""
    v = np.asarray(values, dtype=np.float64)
    v = v - v.mean()
    n = v.size
    size = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(v, size)
    acf = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return acf


def fit_correlation_time(C: np.ndarray, T: int, threshold: float | None = None) -> float | None:
    """Fit ``C(s) / C(0) ~ exp(-s / tau)`` by least squares on ``log`` over the leading lags.

    Lags are used up to the first one whose normalised correlation falls to
    ``threshold`` (default ``max(0.05, 4/sqrt(T))``, above the noise floor).
    Returns ``None`` if the fitted decay rate is not positive.
    """
    if C[0] <= 0:
        return None
    rho = C / C[0]
    if threshold is None:
        threshold = max(0.05, 4.0 / math.sqrt(T))
    below = np.nonzero(rho <= threshold)[0]
    stop = int(below[0]) if below.size else rho.size
    if stop <= 1:
        return 0.0
    if stop == 2:
        return -1.0 / math.log(rho[1])
    s = np.arange(stop, dtype=np.float64)
    slope = np.polyfit(s, np.log(rho[:stop]), 1)[0]
    if slope >= 0:
        return None
    return -1.0 / slope


def reference_tau(u, seed: int = 0) -> float:
    """Spectral relaxation time when the state space is small, else a pilot fit."""
    if u.n <= MAX_MATRIX_SITES:
        return spectral_gap(induced_transition_matrix(u))[1]
    traj = run_chain(u, 0, PILOT_STEPS, seed)
    mag = np.bitwise_count(traj).astype(np.float64)
    tau = fit_correlation_time(autocorrelation(mag, min(PILOT_STEPS // 10, 1000)), PILOT_STEPS)
    return max(MIN_TAU, tau or 1.0)


def run_chain(u, x0: int, L: int, seed: int) -> np.ndarray:
    """States after each of ``L`` forward steps, using the uniforms at times ``-L..-1``."""
    stream = RngStream(seed)
    if L == 0:
        return np.zeros(0, dtype=np.int64)
    t = np.arange(-L, 0, dtype=np.int64)
    alphas = stream.alpha(t, LANE_UPDATE).tolist()
    if u.schedule == "sequential":
        sites = (t % u.n).tolist()
    else:
        sites = np.minimum((stream.alpha(t, LANE_SITE) * u.n).astype(np.int64), u.n - 1).tolist()
    up, down = u._up.tolist(), u._down.tolist()
    masks = [int(m) for m in u._masks]
    heat_bath = u.coupling == "heat-bath"
    x = int(x0)
    out = np.empty(L, dtype=np.int64)
    for k in range(L):
        i = sites[k]
        c = (x & masks[i]).bit_count()
        bit = (x >> i) & 1
        a = alphas[k]
        if heat_bath:
            new = a < up[i][c]
        else:
            new = bit ^ (a < (down[i][c] if bit else up[i][c]))
        x = (x | (1 << i)) if new else (x & ~(1 << i))
        out[k] = x
    return out


def forward_mcmc(u, x0: int, T: int, observable, seed: int, burn_in: int | None = None,
                 max_lag: int | None = None) -> ObservableStats:
    """Time average of ``observable`` along a single chain started at ``x0``.

    The first ``burn_in`` of the ``T`` steps are discarded (default ten
    reference relaxation times). ``err = sqrt(2 tau_obs / T_meas) * stddev``
    with ``tau_obs`` the fitted exponential correlation time floored at
    ``MIN_TAU``.
    """
    if burn_in is None:
        tau = reference_tau(u, seed)
        burn_in = int(math.ceil(BURN_IN_FACTOR * tau)) if math.isfinite(tau) else T
    if T <= burn_in:
        raise ValueError(f"duration T={T} must exceed the burn-in {burn_in}")
    traj = run_chain(u, x0, T, seed)[burn_in:]
    vals = np.asarray(observable(traj), dtype=np.float64)
    Tm = vals.size
    if max_lag is None:
        max_lag = min(Tm // 10, 1000)
    max_lag = max(1, min(max_lag, Tm - 1))
    C = autocorrelation(vals, max_lag)
    sd = float(vals.std(ddof=1)) if Tm > 1 else 0.0
    mean = float(vals.mean())
    flags = []
    if C[0] <= 0:
        return ObservableStats(mean, sd, 0.0, T=Tm, autocorr=C, flags=("constant observable",))
    tau_fit = fit_correlation_time(C, Tm)
    if tau_fit is None:
        flags.append("non-positive fitted correlation time")
        return ObservableStats(mean, sd, math.nan, T=Tm, autocorr=C, flags=tuple(flags))
    tau = max(MIN_TAU, tau_fit)
    return ObservableStats(mean, sd, math.sqrt(2.0 * tau / Tm) * sd, T=Tm, tau_obs=tau,
                           tau_fit=tau_fit, autocorr=C, flags=tuple(flags))
