"""Spin and lattice-gas models written as coupled random maps ``x -> phi(x, alpha)``.

States are integers; bit ``i`` of ``x`` is site ``i`` (spin up, or occupied,
when set). Every update resamples a single site from a uniform ``alpha``
against a per-site threshold table indexed by the number of set neighbour
bits, so one code path serves scalars, state vectors and seed batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import LANE_SITE, LANE_UPDATE, RngStream

MAX_MATRIX_SITES = 10
COUPLINGS = ("heat-bath", "flip")
SCHEDULES = ("sequential", "random")


# ---------------------------------------------------------------- lattices

def _normalise_edges(n: int, edges) -> tuple[tuple[int, int], ...]:
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) outside 0..{n - 1}")
        if i == j:
            raise ValueError(f"self-edge at site {i}")
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


def chain_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def cycle_edges(n: int) -> list[tuple[int, int]]:
    if n < 3:
        return chain_edges(n)
    return chain_edges(n) + [(0, n - 1)]


def square_edges(rows: int, cols: int, periodic: bool = False) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds of a ``rows x cols`` grid, site index ``r * cols + c``.

    Wrapping bonds that would duplicate an existing bond (side length 2) are
    dropped; the graph stays simple.
    """
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            elif periodic and cols > 2:
                edges.append((s, r * cols))
            if r + 1 < rows:
                edges.append((s, s + cols))
            elif periodic and rows > 2:
                edges.append((s, c))
    return edges


@dataclass(frozen=True)
class Lattice:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a lattice needs at least one site")
        object.__setattr__(self, "edges", _normalise_edges(self.n, self.edges))

    @property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        nb = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return tuple(tuple(sorted(v)) for v in nb)

    @property
    def masks(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            m[i] |= 1 << j
            m[j] |= 1 << i
        return m

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(v) for v in self.neighbours], dtype=np.int64)


# ------------------------------------------------------------------ models

def glauber_flip_prob(delta_e, beta: float):
    """Flip probability ``1 / (1 + exp(beta * dE))``, evaluated without overflow."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    z = beta * np.asarray(delta_e, dtype=np.float64)
    e = np.exp(-np.abs(z))
    p = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return float(p) if p.ndim == 0 else p


def _spins(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    bits = (x[..., None] >> np.arange(n, dtype=np.int64)) & 1
    return 2 * bits - 1


@dataclass(frozen=True)
class IsingModel:
    """Ising model with ``E = -J sum_<ij> s_i s_j - h sum_i s_i``."""

    lattice: Lattice
    J: float = 1.0
    h: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def ferromagnetic(self) -> bool:
        return self.J >= 0

    def energy(self, x):
        s = _spins(x, self.n)
        e = -self.h * s.sum(axis=-1)
        for i, j in self.lattice.edges:
            e = e - self.J * s[..., i] * s[..., j]
        return e.astype(np.float64) if np.ndim(e) else float(e)

    def delta_energy(self, x, i: int):
        """``energy(x with site i flipped) - energy(x)``, from the neighbours of ``i`` only."""
        if not 0 <= i < self.n:
            raise IndexError(f"site {i} out of range for n={self.n}")
        x = np.asarray(x, dtype=np.int64)
        si = 2 * ((x >> i) & 1) - 1
        local = np.full(x.shape, self.h, dtype=np.float64)
        for j in self.lattice.neighbours[i]:
            local = local + self.J * (2 * ((x >> j) & 1) - 1)
        d = 2.0 * si * local
        return float(d) if d.ndim == 0 else d

    def log_weights(self, x) -> np.ndarray:
        return -self.beta * np.asarray(self.energy(x), dtype=np.float64)

    def is_admissible(self, x):
        x = np.asarray(x)
        out = np.ones(x.shape, dtype=bool)
        return bool(out) if out.ndim == 0 else out

    def site_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Conditional probabilities of bit 1 and bit 0 at each site, by set-neighbour count.

        Both entries are evaluated from the same stable formula (never as
        ``1 - p``) so that the two couplings induce identical measures.
        """
        deg = self.lattice.degrees
        width = int(deg.max(initial=0)) + 1
        up = np.zeros((self.n, width))
        down = np.zeros((self.n, width))
        for i in range(self.n):
            for c in range(int(deg[i]) + 1):
                local = self.J * (2 * c - deg[i]) + self.h
                up[i, c] = glauber_flip_prob(-2.0 * local, self.beta)
                down[i, c] = glauber_flip_prob(2.0 * local, self.beta)
        return up, down


@dataclass(frozen=True)
class HardCoreModel:
    """Hard-core lattice gas: no two adjacent sites occupied, weight ``fugacity ** occupied``."""

    lattice: Lattice
    fugacity: float = 1.0

    def __post_init__(self):
        if not self.fugacity > 0:
            raise ValueError("fugacity must be positive")

    @property
    def n(self) -> int:
        return self.lattice.n

    def occupation(self, x):
        c = np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)
        return int(c) if c.ndim == 0 else c

    def is_admissible(self, x):
        x = np.asarray(x, dtype=np.int64)
        ok = np.ones(x.shape, dtype=bool)
        for i, j in self.lattice.edges:
            ok &= ((x >> i) & (x >> j) & 1) == 0
        return bool(ok) if ok.ndim == 0 else ok

    def log_weights(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        lw = np.log(self.fugacity) * self.occupation(x)
        return np.where(self.is_admissible(x), lw, -np.inf)

    def site_tables(self) -> tuple[np.ndarray, np.ndarray]:
        deg = self.lattice.degrees
        width = int(deg.max(initial=0)) + 1
        up = np.zeros((self.n, width))
        down = np.ones((self.n, width))
        up[:, 0] = self.fugacity / (1.0 + self.fugacity)
        down[:, 0] = 1.0 / (1.0 + self.fugacity)
        return up, down


def is_admissible(model, x):
    return model.is_admissible(x)


def gibbs_distribution(model) -> np.ndarray:
    """Exactly enumerated equilibrium measure over all ``2**n`` states."""
    if model.n > 24:
        raise ValueError("enumeration limited to n <= 24")
    lw = model.log_weights(np.arange(2**model.n, dtype=np.int64))
    w = np.exp(lw - np.max(lw))
    return w / w.sum()


# --------------------------------------------------------- coupled updates

@dataclass(frozen=True)
class CoupledUpdate:
    """Single-site random map: site from the schedule, new value from ``alpha``.

    ``heat-bath`` sets the bit to 1 iff ``alpha < P(bit = 1 | neighbours)``;
    ``flip`` flips the bit iff ``alpha`` is below the conditional probability
    of the opposite value, which for Ising spins is the Glauber rule.
    """

    model: object
    coupling: str = "heat-bath"
    schedule: str = "sequential"
    _up: np.ndarray = field(init=False, repr=False, compare=False)
    _down: np.ndarray = field(init=False, repr=False, compare=False)
    _masks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        up, down = self.model.site_tables()
        object.__setattr__(self, "_up", up)
        object.__setattr__(self, "_down", down)
        object.__setattr__(self, "_masks", self.model.lattice.masks)

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def N(self) -> int:
        return 2**self.model.n

    @property
    def monotone(self) -> bool:
        """Heat-bath on a ferromagnetic Ising model preserves the componentwise order."""
        return self.coupling == "heat-bath" and isinstance(self.model, IsingModel) and self.model.J >= 0

    def prepare(self, x):
        """Map applied to start states before evolution (identity here)."""
        return x

    def site(self, t, stream: RngStream | None = None):
        if self.schedule == "sequential":
            return int(t) % self.n if np.ndim(t) == 0 else np.asarray(t) % self.n
        if stream is None:
            raise ValueError("random-site schedule needs the random stream")
        a = stream.alpha(t, LANE_SITE)
        return np.minimum((a * self.n).astype(np.int64), self.n - 1)

    def thresholds(self, x, i):
        """``(p_one, p_zero)`` at site ``i`` for state(s) ``x``."""
        cnt = np.bitwise_count(np.asarray(x, dtype=np.int64) & self._masks[i]).astype(np.int64)
        return self._up[i, cnt], self._down[i, cnt]

    def apply(self, x, i, alpha):
        """Vectorised ``phi``: update site ``i`` of ``x`` with uniform ``alpha`` (broadcasting)."""
        x = np.asarray(x, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        p1, p0 = self.thresholds(x, i)
        bit = (x >> i) & 1
        if self.coupling == "heat-bath":
            new = (alpha < p1).astype(np.int64)
        else:
            new = bit ^ (alpha < np.where(bit == 1, p0, p1)).astype(np.int64)
        return (x & ~(np.int64(1) << i)) | (new << i)

    def step(self, X, t: int, stream: RngStream):
        """Apply ``f_t`` to every tracked state; ``X`` has shape ``(batch, K)`` or ``(K,)``."""
        alpha = stream.alpha(t, LANE_UPDATE)
        i = self.site(t, stream)
        if np.ndim(alpha):
            alpha = alpha[:, None]
            if np.ndim(i):
                i = i[:, None]
        return self.apply(X, i, alpha)

    def transitions(self, y: int, i: int) -> list[tuple[float, int]]:
        """Breakpoint decomposition of ``alpha -> phi(y, alpha)`` at site ``i``.

        Returns ``(measure, target)`` pairs covering ``[0, 1)``; the map is a
        step function of ``alpha`` with a single breakpoint.
        """
        p1, p0 = (float(v) for v in self.thresholds(y, i))
        one, zero = y | (1 << i), y & ~(1 << i)
        if self.coupling == "heat-bath" or (y >> i) & 1 == 0:
            pieces = [(p1, one), (p0, zero)]
        else:
            # flip first on [0, p0), stay on [p0, 1)
            pieces = [(p0, zero), (p1, one)]
        return sorted(pieces, key=lambda mt: mt[1])


def apply_update(u: CoupledUpdate, x: int, t: int, alpha: float, stream: RngStream | None = None) -> int:
    """``f_t(x)`` for a single state; ``stream`` is needed only for random-site schedules."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    return int(u.apply(x, u.site(t, stream), alpha))


def site_transition_matrix(u: CoupledUpdate, i: int) -> np.ndarray:
    """Exact kernel of the update at site ``i``, integrating over ``alpha``."""
    N = u.N
    P = np.zeros((N, N))
    for y in range(N):
        for measure, x in u.transitions(y, i):
            P[x, y] += measure
    return P


def induced_transition_matrix(u: CoupledUpdate) -> np.ndarray:
    """One-step kernel with the site drawn uniformly: ``(1/n) sum_i P_i``.

    This is the exact kernel of the random-site schedule and the reversible
    reference chain for the sequential sweep, whose per-step kernels are the
    individual ``P_i``.
    """
    if u.n > MAX_MATRIX_SITES:
        raise ValueError(f"state space too large for a dense matrix (n={u.n} > {MAX_MATRIX_SITES})")
    P = np.zeros((u.N, u.N))
    for i in range(u.n):
        P += site_transition_matrix(u, i)
    return P / u.n


# ---------------------------------------------------------- construction

def build_lattice(kind: str, n: int | None = None, rows: int | None = None,
                  cols: int | None = None, edges=None) -> Lattice:
    if kind == "chain":
        return Lattice(n, tuple(chain_edges(n)))
    if kind == "cycle":
        return Lattice(n, tuple(cycle_edges(n)))
    if kind in ("square-open", "square-periodic"):
        if not rows or not cols:
            raise ValueError(f"{kind} lattice needs rows and cols")
        return Lattice(rows * cols, tuple(square_edges(rows, cols, kind == "square-periodic")))
    if kind == "edges":
        if n is None or edges is None:
            raise ValueError("explicit lattice needs n and edges")
        return Lattice(n, tuple(tuple(e) for e in edges))
    raise ValueError(f"unknown lattice kind {kind!r}")


def magnetization(x, n: int):
    return _spins(x, n).sum(axis=-1)


def extremal_states(n: int) -> tuple[int, int]:
    """All-down and all-up configurations."""
    return 0, (1 << n) - 1


def boltzmann_mean(model, observable) -> float:
    pi = gibbs_distribution(model)
    vals = np.asarray(observable(np.arange(pi.size, dtype=np.int64)), dtype=np.float64)
    return float(pi @ vals)


__all__ = [
    "CoupledUpdate", "HardCoreModel", "IsingModel", "Lattice", "apply_update", "boltzmann_mean",
    "build_lattice", "chain_edges", "cycle_edges", "extremal_states", "gibbs_distribution",
    "glauber_flip_prob", "induced_transition_matrix", "is_admissible", "magnetization",
    "site_transition_matrix", "square_edges",
]
