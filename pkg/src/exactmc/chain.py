"""Dense finite Markov chains in the column convention.

``P[x, y]`` is the probability of being in ``x`` at ``t + 1`` given ``y`` at
``t``, so columns sum to one and distributions evolve as ``p <- P @ p``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STOCHASTIC_TOL = 1e-12
DEGENERATE_THRESHOLD = 1e-10
POWER_ITERATION_CAP = 10**6


class DegenerateChainError(ValueError):
    """The chain has no unique limiting distribution."""


@dataclass(frozen=True)
class StateSpace:
    """Configuration set coded on ``n`` bits, optionally with an admissibility predicate."""

    n: int
    N: int
    admissible: object = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("bit count must be non-negative")
        if not 1 <= self.N <= 2**self.n:
            raise ValueError(f"need 1 <= N <= 2**n, got N={self.N}, n={self.n}")
        if self.admissible is not None and self.admissible_count() < 1:
            raise ValueError("admissibility predicate rejects every state")

    def states(self) -> np.ndarray:
        return np.arange(self.N, dtype=np.int64)

    def admissible_count(self) -> int:
        if self.admissible is None:
            return self.N
        return int(np.count_nonzero(self.admissible(self.states())))


@dataclass(frozen=True)
class TimeScales:
    """Relaxation time, observable relaxation time and mean coalescence time.

    ``math.inf`` marks an unbounded time (zero spectral gap); ``None`` marks a
    quantity that was not computed.
    """

    tau: float | None = None
    tau_obs: float | None = None
    tau_hat: float | None = None

    def __post_init__(self):
        for name in ("tau", "tau_obs", "tau_hat"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")


def validate_transition_matrix(P, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValueError(f"transition matrix must be square and non-empty, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("transition matrix has non-finite entries")
    if np.any(P < 0):
        raise ValueError("transition matrix has negative entries")
    dev = np.max(np.abs(P.sum(axis=0) - 1.0))
    if dev > tol:
        raise ValueError(f"columns must sum to 1 (max deviation {dev:.3e})")
    return P


def validate_distribution(pi, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1 or pi.size == 0:
        raise ValueError("distribution must be a non-empty vector")
    if np.any(pi < 0) or not np.all(np.isfinite(pi)):
        raise ValueError("distribution has negative or non-finite weights")
    if abs(pi.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {pi.sum()!r}, not 1")
    return pi


def _eigenvalues_by_modulus(P: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(P)
    return ev[np.argsort(-np.abs(ev), kind="stable")]


def stationary_distribution(P, tol: float = 1e-12) -> np.ndarray:
    """Unique stationary distribution of ``P``.

    Raises
    ------
    DegenerateChainError
        If a second eigenvalue of modulus ``> 1 - 1e-10`` exists (reducible
        or periodic chain).
    """
    P = validate_transition_matrix(P)
    N = P.shape[0]
    if N == 1:
        return np.ones(1)
    ev = _eigenvalues_by_modulus(P)
    if abs(ev[1]) > 1.0 - DEGENERATE_THRESHOLD:
        raise DegenerateChainError(
            f"degenerate chain: second eigenvalue modulus {abs(ev[1]):.12f} is 1 within tolerance"
        )
    # null vector of (P - I) with the normalisation row appended
    A = np.vstack([P - np.eye(N), np.ones((1, N))])
    b = np.zeros(N + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    for _ in range(POWER_ITERATION_CAP):
        nxt = P @ pi
        nxt /= nxt.sum()
        done = np.abs(nxt - pi).sum() <= tol
        pi = nxt
        if done:
            break
    return pi


def check_detailed_balance(P, pi, tol: float = 1e-12) -> bool:
    """True iff ``|pi(x) P(y,x) - pi(y) P(x,y)| <= tol`` for every pair."""
    P = np.asarray(P, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or pi.shape != (P.shape[0],):
        raise ValueError(f"dimension mismatch: P {P.shape}, pi {pi.shape}")
    # flow[y, x] = pi(x) P(y, x) is the probability flux x -> y
    flow = P * pi[None, :]
    return bool(np.max(np.abs(flow - flow.T)) <= tol)


def spectral_gap(P, tol: float = DEGENERATE_THRESHOLD) -> tuple[float, float]:
    """Return ``(gap, tau)`` with ``gap = 1 - |lambda_2|`` and ``tau = 1/gap``.

    Reversible chains are symmetrised as ``D^-1/2 P D^1/2`` (``D = diag(pi)``)
    and handled by a symmetric eigensolver; otherwise the general spectrum is
    used. A gap not exceeding ``tol`` gives ``tau = inf``.
    """
    P = validate_transition_matrix(P)
    N = P.shape[0]
    if N == 1:
        return 1.0, 1.0
    ev = None
    try:
        pi = stationary_distribution(P)
    except DegenerateChainError:
        pi = None
    if pi is not None and np.all(pi > 0) and check_detailed_balance(P, pi, tol=1e-10):
        s = np.sqrt(pi)
        # D^-1/2 P D^1/2 is symmetric exactly when detailed balance holds
        S = P * s[None, :] / s[:, None]
        S = 0.5 * (S + S.T)
        ev = np.linalg.eigvalsh(S)
        ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    if ev is None:
        ev = _eigenvalues_by_modulus(P)
    gap = float(max(0.0, 1.0 - abs(ev[1])))
    if gap <= tol:
        return gap, math.inf
    return gap, 1.0 / gap


def distribution_after(P, x0: int, T: int) -> np.ndarray:
    """Column ``x0`` of ``P**T``: the law of the chain at time ``T`` started at ``x0``."""
    P = validate_transition_matrix(P)
    if T < 0:
        raise ValueError("T must be non-negative")
    if not 0 <= x0 < P.shape[0]:
        raise ValueError(f"state {x0} out of range")
    p = np.zeros(P.shape[0])
    p[x0] = 1.0
    if T == 0:
        return p
    return np.linalg.matrix_power(P, T) @ p


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def empirical_distribution(samples, N: int) -> np.ndarray:
    counts = np.bincount(np.asarray(samples, dtype=np.int64), minlength=N)
    return counts / counts.sum()


# JSON layout: {"dimension": N, "entries": [...]} with entries row-major, so
# entries[x * N + y] = P(x, y); distributions use {"dimension": N, "weights": [...]}.

def matrix_to_json(P) -> dict:
    P = validate_transition_matrix(P)
    return {"dimension": int(P.shape[0]), "entries": P.ravel(order="C").tolist()}


def matrix_from_json(doc: dict) -> np.ndarray:
    try:
        N = int(doc["dimension"])
        entries = doc["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError("matrix JSON needs 'dimension' and 'entries'") from exc
    if len(entries) != N * N:
        raise ValueError(f"expected {N * N} entries, got {len(entries)}")
    return validate_transition_matrix(np.asarray(entries, dtype=np.float64).reshape(N, N))


def distribution_to_json(pi) -> dict:
    pi = validate_distribution(pi)
    return {"dimension": int(pi.size), "weights": pi.tolist()}


def distribution_from_json(doc: dict) -> np.ndarray:
    try:
        N = int(doc["dimension"])
        w = doc["weights"]
    except (KeyError, TypeError) as exc:
        raise ValueError("distribution JSON needs 'dimension' and 'weights'") from exc
    if len(w) != N:
        raise ValueError(f"expected {N} weights, got {len(w)}")
    return validate_distribution(w)


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()))
