"""Reference engines used to validate the closed forms.

These rely only on elementary constructions (uniformization of a finite
generator, direct convolution of Poisson jump counts, truncated series)
and share no code with the analytic evaluators they check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .bdm import BdmSpec, PureMigrationSpec, bd_pmf
from .skellam import TruncationError, poisson_tail_bound, poisson_tail_count

__all__ = [
    "FiniteGenerator",
    "build_death_migration_generator",
    "build_pure_migration_generator",
    "transient_pmf",
    "stationary_vector",
    "poisson_convolution_pmf",
    "bd_difference_convolution",
]

UNIFORMIZATION_EPS = 1e-14
CONVOLUTION_EPS = 1e-12
MAX_UNIFORMIZATION_TERMS = 1_000_000


@dataclass(frozen=True)
class FiniteGenerator:
    """Rate matrix of a finite chain with its lexicographically ordered states."""

    states: tuple
    Q: np.ndarray
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (len(self.states), len(self.states)):
            raise ValueError("Q must be square with one row per state")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be >= 0")
        if np.max(np.abs(Q.sum(axis=1)), initial=0.0) > 1e-12 * max(1.0, np.abs(Q).max(initial=0.0)):
            raise ValueError("rows of Q must sum to 0")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.states)})

    @property
    def size(self) -> int:
        return len(self.states)

    def point_mass(self, state) -> np.ndarray:
        p = np.zeros(self.size)
        p[self.index[tuple(state)]] = 1.0
        return p


def _from_rates(states, rates) -> FiniteGenerator:
    idx = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s, moves in zip(states, rates):
        for target, r in moves:
            if r > 0:
                Q[idx[s], idx[target]] += r
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return FiniteGenerator(tuple(states), Q)


def build_death_migration_generator(spec: BdmSpec) -> FiniteGenerator:
    """Generator on the simplex ``{(h, k): h + k <= n1 + n2}``."""
    if not spec.is_death_migration:
        raise ValueError("needs lambda1 = lambda2 = 0")
    n = spec.total
    states = [(h, k) for h in range(n + 1) for k in range(n + 1 - h)]
    rates = []
    for h, k in states:
        rates.append([
            ((h - 1, k), spec.mu1 * h),
            ((h - 1, k + 1), spec.eta1 * h),
            ((h, k - 1), spec.mu2 * k),
            ((h + 1, k - 1), spec.eta2 * k),
        ])
    return _from_rates(states, rates)


def build_pure_migration_generator(spec: PureMigrationSpec) -> FiniteGenerator:
    """Tridiagonal generator for ``N1`` on ``0..n1+n2``."""
    n = spec.total
    states = [(k,) for k in range(n + 1)]
    rates = [[((k - 1,), spec.eta1 * k), ((k + 1,), spec.eta2 * (n - k))] for (k,) in states]
    return _from_rates(states, rates)


def transient_pmf(gen: FiniteGenerator, initial, t: float, rate: float | None = None,
                  eps: float = UNIFORMIZATION_EPS) -> np.ndarray:
    """Law at time ``t`` by uniformization.

    ``initial`` is either a state of ``gen`` (a tuple) or a probability
    vector given as a numpy array.
    ``rate`` is the uniformization constant (default ``max |Q_ii|``); the
    Poisson series is cut once its remaining mass is below ``eps``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if isinstance(initial, np.ndarray):
        p0 = initial.astype(float)
    else:
        p0 = gen.point_mass(initial)
    qmax = float(np.max(-np.diag(gen.Q), initial=0.0))
    lam = qmax if rate is None else float(rate)
    if lam < qmax:
        raise ValueError("uniformization rate must be >= max |Q_ii|")
    if t == 0 or lam == 0:
        return p0.copy()
    P = np.eye(gen.size) + gen.Q / lam
    mean = lam * t
    K = poisson_tail_count(mean, eps)
    if K > MAX_UNIFORMIZATION_TERMS:
        raise TruncationError("uniformization needs too many terms", eps)
    ks = np.arange(K + 1)
    w = np.exp(ks * math.log(mean) - mean - gammaln(ks + 1))
    out = np.zeros(gen.size)
    v = p0.copy()
    for k in range(K + 1):
        out += w[k] * v
        v = v @ P
    return np.clip(out, 0.0, None)


def stationary_vector(gen: FiniteGenerator) -> np.ndarray:
    """Solve ``pi Q = 0`` with ``sum(pi) = 1`` by least squares."""
    A = np.vstack([gen.Q.T, np.ones(gen.size)])
    b = np.zeros(gen.size + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def poisson_convolution_pmf(jumps: Sequence[tuple[tuple[int, int], float]],
                            window: tuple[tuple[int, int], tuple[int, int]],
                            initial: tuple[int, int] = (0, 0),
                            max_counts: Sequence[int] | None = None,
                            eps: float = CONVOLUTION_EPS) -> np.ndarray:
    """Joint law of ``initial + sum_i J_i C_i`` with independent ``C_i ~ Poisson(Lambda_i)``.

    Convolves one jump type at a time on a bounding box.  Each count is cut
    at the point where its Poisson tail falls below ``eps`` divided by the
    number of types; user-supplied ``max_counts`` below that point raise
    :class:`TruncationError` with the achieved bound.

    Returns ``out[i, j] = P{X = (m_lo + i, n_lo + j)}`` for the window
    ``((m_lo, m_hi), (n_lo, n_hi))``.
    """
    jumps = [(tuple(int(x) for x in j), float(lam)) for j, lam in jumps]
    per = eps / max(1, len(jumps))
    needed = [poisson_tail_count(lam, per) for _, lam in jumps]
    if max_counts is None:
        counts = needed
    else:
        counts = list(max_counts)
        bound = sum(poisson_tail_bound(lam, c) for (_, lam), c in zip(jumps, counts))
        if bound > eps:
            raise TruncationError("max_counts too small for poisson_convolution_pmf", bound)
    lo = np.array(initial, dtype=np.int64)
    hi = np.array(initial, dtype=np.int64)
    for (j, _), c in zip(jumps, counts):
        jv = np.array(j) * c
        lo += np.minimum(jv, 0)
        hi += np.maximum(jv, 0)
    box = np.zeros(tuple(hi - lo + 1))
    box[tuple(np.array(initial) - lo)] = 1.0
    for (j, lam), c in zip(jumps, counts):
        if lam == 0 or c == 0:
            continue
        ks = np.arange(c + 1)
        w = np.exp(ks * math.log(lam) - lam - gammaln(ks + 1))
        new = np.zeros_like(box)
        for k in ks:
            di, dj = j[0] * k, j[1] * k
            src = box[max(0, -di):box.shape[0] - max(0, di), max(0, -dj):box.shape[1] - max(0, dj)]
            new[max(0, di):max(0, di) + src.shape[0], max(0, dj):max(0, dj) + src.shape[1]] += w[k] * src
        box = new
    (mlo, mhi), (nlo, nhi) = window
    out = np.zeros((mhi - mlo + 1, nhi - nlo + 1))
    for i, m in enumerate(range(mlo, mhi + 1)):
        if not lo[0] <= m <= hi[0]:
            continue
        for jj, n in enumerate(range(nlo, nhi + 1)):
            if lo[1] <= n <= hi[1]:
                out[i, jj] = box[m - lo[0], n - lo[1]]
    return out



def bd_difference_convolution(lambda1: float, mu1: float, lambda2: float, mu2: float,
                              t: float, k: int, eps: float = 1e-14) -> float:
    """``sum_h P{N1 = h + k} P{N2 = h}`` truncated with a geometric tail certificate."""
    if k < 0:
        return bd_difference_convolution(lambda2, mu2, lambda1, mu1, t, -k, eps)

    def ratio(lam, mu):
        E = math.exp(-(lam - mu) * t)
        return lam * (1.0 - E) / (lam - mu * E)

    r = ratio(lambda1, mu1) * ratio(lambda2, mu2)
    H = 1
    while True:
        # every later term is at most r times the previous one
        last = bd_pmf(lambda1, mu1, t, H + k) * bd_pmf(lambda2, mu2, t, H)
        if last / (1.0 - r) < eps:
            break
        H += 1
    h = np.arange(0, H + 1)
    return float(np.sum(bd_pmf(lambda1, mu1, t, h + k) * bd_pmf(lambda2, mu2, t, h)))
