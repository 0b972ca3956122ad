"""Linear birth-death-migration processes on two groups.

Each unit of group ``g`` independently gives birth at rate ``lambda_g``,
dies at rate ``mu_g`` and moves to the other group at rate ``eta_g``.  The
module covers exact simulation, closed-form moments, the death-migration
multinomial law, extinction and first-passage quantities, the pure
migration chain and differences of two independent birth-death processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.stats import binom

from .ratefn import RateFunction
from .skellam import SamplePath
from .specfun import harmonic_number

__all__ = [
    "BdmSpec",
    "LMRCoefficients",
    "MultinomialPair",
    "MomentState",
    "PureMigrationSpec",
    "ResonanceError",
    "lmr",
    "sample_gillespie",
    "sample_endpoints",
    "sample_extinction_times",
    "mean_vector",
    "moments_ode",
    "second_moments_reduced",
    "pgf_pde_residual",
    "multinomial_coefficients",
    "death_migration_table",
    "death_migration_pmf",
    "death_migration_pgf",
    "symmetric_death_pgf",
    "pgf_symmetric_nonhomogeneous",
    "covariance_death_migration",
    "extinction_probability",
    "expected_extinction_time",
    "total_population_pmf",
    "first_passage_survival",
    "first_passage_gf_residual",
    "max_of_deaths_identity_check",
    "pure_migration_coefficients",
    "pure_migration_pmf",
    "pure_migration_pgf",
    "pure_migration_stationary",
    "pure_migration_master_rhs",
    "pure_migration_master_residual",
    "pure_migration_pgf_residual",
    "bd_pmf",
    "bd_difference_pmf",
]

RESONANCE_GUARD = 1e-8
REDUCED_TOL = 1e-12
CRITICAL_GUARD = 1e-10


class ResonanceError(ValueError):
    """Closed form is singular here; integrate the moment equations instead."""


@dataclass(frozen=True)
class BdmSpec:
    lambda1: float = 0.0
    lambda2: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0
    eta1: float = 0.0
    eta2: float = 0.0
    initial: tuple = (0, 0)

    def __post_init__(self):
        rates = (self.lambda1, self.lambda2, self.mu1, self.mu2, self.eta1, self.eta2)
        if any(r < 0 or not math.isfinite(r) for r in rates):
            raise ValueError("rates must be finite and >= 0")
        if len(self.initial) != 2 or any(int(n) != n or n < 0 for n in self.initial):
            raise ValueError("initial must be a pair of non-negative integers")
        object.__setattr__(self, "initial", (int(self.initial[0]), int(self.initial[1])))

    @property
    def is_death_migration(self) -> bool:
        return self.lambda1 == 0 and self.lambda2 == 0

    @property
    def total(self) -> int:
        return self.initial[0] + self.initial[1]

    def swapped(self) -> "BdmSpec":
        return BdmSpec(self.lambda2, self.lambda1, self.mu2, self.mu1, self.eta2, self.eta1,
                       (self.initial[1], self.initial[0]))


@dataclass(frozen=True)
class LMRCoefficients:
    L: float
    M: float
    R: float


def lmr(spec: BdmSpec) -> LMRCoefficients:
    s = spec
    g1 = -s.lambda1 + s.mu1 + s.eta1
    g2 = -s.lambda2 + s.mu2 + s.eta2
    M = g1 - g2
    return LMRCoefficients(g1 + g2, M, math.sqrt(M * M + 4.0 * s.eta1 * s.eta2))


def _cosh_sinh(R: float, t: float) -> tuple[float, float]:
    """``cosh(R t/2)`` and ``sinh(R t/2) / R`` with the ``R -> 0`` limit ``t/2``."""
    x = 0.5 * R * t
    if abs(x) < 1e-6:
        return math.cosh(x), 0.5 * t * (1.0 + x * x / 6.0)
    return math.cosh(x), math.sinh(x) / R


# -- simulation -------------------------------------------------------------


def _event_rates(spec: BdmSpec, h, k):
    s = spec
    return np.stack([s.lambda1 * h, s.mu1 * h, s.eta1 * h, s.lambda2 * k, s.mu2 * k, s.eta2 * k], axis=-1)


# state change for each event: birth1, death1, move 1->2, birth2, death2, move 2->1
_MOVES = np.array([(1, 0), (-1, 0), (-1, 1), (0, 1), (0, -1), (1, -1)], dtype=np.int64)


def sample_gillespie(spec: BdmSpec, horizon: float, rng: np.random.Generator) -> SamplePath:
    """Exact path on ``[0, horizon]``; states with zero total rate are absorbing."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    h, k = spec.initial
    t = 0.0
    times, jumps = [], []
    while True:
        rates = _event_rates(spec, h, k)
        total = rates.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        e = int(np.searchsorted(np.cumsum(rates), rng.uniform(0.0, total), side="right"))
        e = min(e, 5)
        h += _MOVES[e, 0]
        k += _MOVES[e, 1]
        times.append(t)
        jumps.append(_MOVES[e])
    return SamplePath(np.array(times), np.array(jumps).reshape(len(times), 2), spec.initial, horizon)


def _batch(spec: BdmSpec, horizons: np.ndarray, rng: np.random.Generator):
    size = len(horizons)
    state = np.tile(np.asarray(spec.initial, dtype=np.int64), (size, 1))
    clock = np.zeros(size)
    absorbed_at = np.full(size, np.inf)
    active = np.arange(size)
    while len(active):
        rates = _event_rates(spec, state[active, 0], state[active, 1]).astype(float)
        total = rates.sum(axis=1)
        dead = total <= 0
        absorbed_at[active[dead]] = clock[active[dead]]
        active, rates, total = active[~dead], rates[~dead], total[~dead]
        if not len(active):
            break
        clock[active] += rng.exponential(1.0, size=len(active)) / total
        going = clock[active] <= horizons[active]
        active, rates, total = active[going], rates[going], total[going]
        if not len(active):
            break
        cum = np.cumsum(rates, axis=1)
        pick = rng.uniform(0.0, 1.0, size=len(active)) * total
        e = np.minimum((cum <= pick[:, None]).sum(axis=1), 5)
        state[active] += _MOVES[e]
    return state, absorbed_at


def sample_endpoints(spec: BdmSpec, horizon, size: int, rng: np.random.Generator) -> np.ndarray:
    """Endpoints of ``size`` Gillespie paths; ``horizon`` may be per replicate."""
    horizons = np.broadcast_to(np.asarray(horizon, dtype=float), (size,)).copy()
    return _batch(spec, horizons, rng)[0]


def sample_extinction_times(spec: BdmSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Absorption times at ``(0, 0)`` for a death-migration spec with positive deaths."""
    if not spec.is_death_migration or spec.mu1 <= 0 or spec.mu2 <= 0:
        raise ValueError("extinction times need lambda = 0 and mu > 0")
    return _batch(spec, np.full(size, np.inf), rng)[1]


# -- moments ----------------------------------------------------------------


def mean_vector(spec: BdmSpec, t: float) -> tuple[float, float]:
    """``(E N1(t), E N2(t))`` in closed form."""
    if t < 0:
        raise ValueError("t must be >= 0")
    c = lmr(spec)
    n1, n2 = spec.initial
    ch, sh = _cosh_sinh(c.R, t)
    damp = math.exp(-0.5 * c.L * t)
    m1 = damp * (n1 * ch + (2.0 * n2 * spec.eta2 - n1 * c.M) * sh)
    m2 = damp * (n2 * ch + (2.0 * n1 * spec.eta1 + n2 * c.M) * sh)
    return m1, m2


@dataclass(frozen=True)
class MomentState:
    """First and second factorial moments at one time.

    ``sigma = E N1 N2``, ``sigma1 = E N1 (N1 - 1)``, ``sigma2 = E N2 (N2 - 1)``.
    """

    mean1: float
    mean2: float
    sigma: float
    sigma1: float
    sigma2: float


def _moment_matrix(spec: BdmSpec) -> np.ndarray:
    s = spec
    a1 = s.lambda1 - s.mu1 - s.eta1
    a2 = s.lambda2 - s.mu2 - s.eta2
    # unknowns: (m1, m2, sigma, sigma1, sigma2)
    return np.array([
        [a1, s.eta2, 0.0, 0.0, 0.0],
        [s.eta1, a2, 0.0, 0.0, 0.0],
        [0.0, 0.0, a1 + a2, s.eta1, s.eta2],
        [2.0 * s.lambda1, 0.0, 2.0 * s.eta2, 2.0 * a1, 0.0],
        [0.0, 2.0 * s.lambda2, 2.0 * s.eta1, 0.0, 2.0 * a2],
    ])


def moments_ode(spec: BdmSpec, t: float, atol: float = 1e-12, rtol: float = 1e-12) -> MomentState:
    """Integrate the linear moment equations with an adaptive 8th-order Runge-Kutta method."""
    if t < 0:
        raise ValueError("t must be >= 0")
    n1, n2 = spec.initial
    y0 = np.array([n1, n2, n1 * n2, n1 * (n1 - 1), n2 * (n2 - 1)], dtype=float)
    if t == 0:
        return MomentState(*y0)
    A = _moment_matrix(spec)
    sol = integrate.solve_ivp(lambda _, y: A @ y, (0.0, t), y0, method="DOP853",
                              atol=atol, rtol=rtol)
    if not sol.success:
        raise RuntimeError(f"moment integration failed: {sol.message}")
    return MomentState(*sol.y[:, -1])


def _reduced_parameters(spec: BdmSpec, guard: float):
    s = spec
    alpha = s.lambda1 - s.mu1
    if abs((s.lambda2 - s.mu2) - alpha) > REDUCED_TOL or abs(s.eta1 - s.eta2) > REDUCED_TOL:
        raise ValueError("reduced form needs lambda1-mu1 = lambda2-mu2 and eta1 = eta2")
    eta = s.eta1
    for bad in (0.0, 2 * eta, 4 * eta, -2 * eta):
        if abs(alpha - bad) <= guard:
            raise ResonanceError(f"alpha={alpha} is within {guard} of the resonance {bad}")
    return alpha, eta


def _sigma1_reduced(lam1, n1, n2, a, b, A, B, alpha, eta, t):
    c1 = (2 * a * eta**2 / (alpha * (alpha - 4 * eta)) + lam1 * (n1 + n2)) / (alpha - 2 * eta)
    c2 = (2 * b * eta**2 / (alpha**2 - 4 * eta**2) + lam1 * (n1 - n2)) / alpha
    K = n1 * (n1 - 1) - A + B + c1 + c2
    return (A * math.exp(2 * alpha * t) - B * math.exp(2 * (alpha - 2 * eta) * t)
            - c1 * math.exp(alpha * t) - c2 * math.exp((alpha - 2 * eta) * t)
            + K * math.exp(2 * (alpha - eta) * t))


def second_moments_reduced(spec: BdmSpec, t: float, guard: float = RESONANCE_GUARD) -> tuple[float, float, float]:
    """Closed-form ``(sigma, sigma1, sigma2)`` when both net growth rates equal ``alpha`` and ``eta1 = eta2``.

    Raises
    ------
    ResonanceError
        If ``alpha`` is within ``guard`` of ``0``, ``2 eta``, ``4 eta`` or
        ``-2 eta``; use :func:`moments_ode` there.
    """
    alpha, eta = _reduced_parameters(spec, guard)
    n1, n2 = spec.initial
    l1, l2 = spec.lambda1, spec.lambda2
    a = (l1 + l2) * (n1 + n2)
    b = (l1 - l2) * (n1 - n2)
    s1, s2 = n1 * (n1 - 1), n2 * (n2 - 1)
    A = n1 * n2 / 2 + (s1 + s2) / 4 + a / (4 * alpha) + b / (4 * (alpha + 2 * eta))
    B = n1 * n2 / 2 - (s1 + s2) / 4 - a / (4 * (alpha - 4 * eta)) - b / (4 * (alpha - 2 * eta))
    C1 = a * eta / (alpha * (alpha - 4 * eta))
    C2 = b * eta / (alpha**2 - 4 * eta**2)
    sigma = (A * math.exp(2 * alpha * t) + B * math.exp(2 * (alpha - 2 * eta) * t)
             + C1 * math.exp(alpha * t) + C2 * math.exp((alpha - 2 * eta) * t))
    sig1 = _sigma1_reduced(l1, n1, n2, a, b, A, B, alpha, eta, t)
    sig2 = _sigma1_reduced(l2, n2, n1, a, b, A, B, alpha, eta, t)
    return sigma, sig1, sig2


# -- generating functions ---------------------------------------------------


def pgf_pde_residual(spec: BdmSpec, t: float, u: float, v: float, h: float = 1e-4, G=None) -> float:
    """Central-difference residual of the joint PGF equation at ``(t, u, v)``.

    ``G(t, u, v)`` defaults to the death-migration closed form.
    """
    if G is None:
        if not spec.is_death_migration:
            raise ValueError("supply G for specs with births")

        def G(tt, uu, vv):
            return death_migration_pgf(spec, tt, uu, vv)

    s = spec
    Gt = (G(t + h, u, v) - G(t - h, u, v)) / (2 * h)
    Gu = (G(t, u + h, v) - G(t, u - h, v)) / (2 * h)
    Gv = (G(t, u, v + h) - G(t, u, v - h)) / (2 * h)
    cu = s.lambda1 * u * u - (s.lambda1 + s.mu1 + s.eta1) * u + s.mu1 + s.eta1 * v
    cv = s.lambda2 * v * v - (s.lambda2 + s.mu2 + s.eta2) * v + s.mu2 + s.eta2 * u
    return Gt - cu * Gu - cv * Gv


@dataclass(frozen=True)
class MultinomialPair:
    """Where a unit ends up at time ``t`` under death and migration.

    A unit starting in group 1 is in group 1 with probability ``A1`` and in
    group 2 with probability ``B1``; ``A2``/``B2`` are the same for a unit
    starting in group 2.
    """

    A1: float
    B1: float
    A2: float
    B2: float
    n1: int
    n2: int
    t: float


def _require_death_migration(spec: BdmSpec):
    if not spec.is_death_migration:
        raise ValueError("this law needs lambda1 = lambda2 = 0")


def multinomial_coefficients(spec: BdmSpec, t: float) -> MultinomialPair:
    _require_death_migration(spec)
    if t < 0:
        raise ValueError("t must be >= 0")
    c = lmr(spec)
    ch, sh = _cosh_sinh(c.R, t)
    damp = math.exp(-0.5 * c.L * t)
    return MultinomialPair(
        damp * (ch - c.M * sh),
        damp * 2.0 * spec.eta1 * sh,
        damp * 2.0 * spec.eta2 * sh,
        damp * (ch + c.M * sh),
        spec.initial[0], spec.initial[1], t,
    )


def _trinomial_table(n: int, a: float, b: float) -> np.ndarray:
    """``out[i, j] = P{(X, Y) = (i, j)}`` for ``Multinomial(n; a, b, 1 - a - b)``."""
    out = np.zeros((n + 1, n + 1))
    c = max(0.0, 1.0 - a - b)
    for i in range(n + 1):
        for j in range(n + 1 - i):
            out[i, j] = (math.factorial(n) / (math.factorial(i) * math.factorial(j) * math.factorial(n - i - j))
                         * a**i * b**j * c ** (n - i - j))
    return out


def death_migration_table(spec: BdmSpec, t: float) -> np.ndarray:
    """Full joint pmf, ``out[m, n] = P{N1(t) = m, N2(t) = n}`` on ``m + n <= n1 + n2``."""
    mp = multinomial_coefficients(spec, t)
    n1, n2 = spec.initial
    first = _trinomial_table(n1, mp.A1, mp.B1)
    second = _trinomial_table(n2, mp.A2, mp.B2)
    tot = n1 + n2
    out = np.zeros((tot + 1, tot + 1))
    for i in range(n1 + 1):
        for j in range(n1 + 1 - i):
            out[i:i + n2 + 1, j:j + n2 + 1] += first[i, j] * second
    return out


def death_migration_pmf(spec: BdmSpec, t: float, m: int, n: int) -> float:
    if m < 0 or n < 0 or m + n > spec.total:
        return 0.0
    return float(death_migration_table(spec, t)[m, n])


def death_migration_pgf(spec: BdmSpec, t: float, u: float, v: float) -> float:
    mp = multinomial_coefficients(spec, t)
    f1 = 1.0 - mp.A1 * (1.0 - u) - mp.B1 * (1.0 - v)
    f2 = 1.0 - mp.A2 * (1.0 - u) - mp.B2 * (1.0 - v)
    return f1**mp.n1 * f2**mp.n2


def symmetric_death_pgf(mu: float, eta1: float, eta2: float, n1: int, n2: int,
                        t: float, u: float, v: float) -> float:
    """Joint PGF when both groups die at the same rate ``mu``."""
    s = eta1 + eta2
    e = math.exp(-s * t)
    d = math.exp(-mu * t) / s
    f1 = 1.0 - d * ((1 - u) * (eta2 + eta1 * e) + (1 - v) * eta1 * (1 - e))
    f2 = 1.0 - d * ((1 - u) * eta2 * (1 - e) + (1 - v) * (eta1 + eta2 * e))
    return f1**n1 * f2**n2


def pgf_symmetric_nonhomogeneous(mu: RateFunction, eta: RateFunction, n1: int, n2: int,
                                 t: float, u: float, v: float) -> float:
    """Joint PGF for equal time-varying death rates ``mu(t)`` and migration rates ``eta(t)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    d = 0.5 * math.exp(-mu.cumulative(t))
    e = math.exp(-2.0 * eta.cumulative(t))
    f1 = 1.0 - d * ((1 - u) * (1 + e) + (1 - v) * (1 - e))
    f2 = 1.0 - d * ((1 - u) * (1 - e) + (1 - v) * (1 + e))
    return f1**n1 * f2**n2


def covariance_death_migration(spec: BdmSpec, t: float) -> float:
    mp = multinomial_coefficients(spec, t)
    return -mp.n1 * mp.A1 * mp.B1 - mp.n2 * mp.A2 * mp.B2


def extinction_probability(spec: BdmSpec, t: float) -> float:
    mp = multinomial_coefficients(spec, t)
    return max(0.0, 1.0 - mp.A1 - mp.B1) ** mp.n1 * max(0.0, 1.0 - mp.A2 - mp.B2) ** mp.n2


def expected_extinction_time(spec: BdmSpec, exact: bool = False):
    """``H_{n1+n2} / mu`` for equal death rates ``mu`` and no births."""
    _require_death_migration(spec)
    if spec.mu1 != spec.mu2:
        raise ValueError("needs mu1 = mu2")
    if spec.mu1 <= 0:
        raise ValueError("mu = 0: the population never goes extinct")
    if spec.total == 0:
        return Fraction(0) if exact else 0.0
    h = harmonic_number(spec.total)
    if exact:
        return h / Fraction(spec.mu1)
    return float(h) / spec.mu1


def total_population_pmf(spec: BdmSpec, t: float) -> np.ndarray:
    """Law of ``N1(t) + N2(t)``: a sum of two independent binomials."""
    mp = multinomial_coefficients(spec, t)
    k1 = np.arange(mp.n1 + 1)
    k2 = np.arange(mp.n2 + 1)
    p1 = binom.pmf(k1, mp.n1, min(1.0, mp.A1 + mp.B1))
    p2 = binom.pmf(k2, mp.n2, min(1.0, mp.A2 + mp.B2))
    return np.convolve(p1, p2)


def first_passage_survival(spec: BdmSpec, t: float, k: int) -> float:
    """``P{T_k > t}`` where ``T_k`` is the first time the total drops to ``k``."""
    if not 0 <= k <= spec.total:
        raise ValueError(f"k must lie in [0, {spec.total}]")
    p = total_population_pmf(spec, t)
    return float(max(0.0, p[k + 1:].sum()))


def first_passage_gf_residual(spec: BdmSpec, t: float, u_grid) -> float:
    """Check ``sum_k u^k P{T_k > t} = (1 - G(t, u, u)) / (1 - u)``.

    The coefficients of the right-hand side are extracted by dividing the
    polynomial ``1 - G(t, u, u)`` by ``1 - u``; the returned value is the
    larger of the coefficient mismatch and the evaluation mismatch on
    ``u_grid`` (points with ``u = 1`` are skipped).
    """
    n = spec.total
    p = total_population_pmf(spec, t)
    num = -p.copy()
    num[0] += 1.0
    coef = np.cumsum(num)[:n]  # quotient of num / (1 - u)
    direct = np.array([first_passage_survival(spec, t, k) for k in range(n)])
    worst = float(np.max(np.abs(coef - direct))) if n else 0.0
    for u in np.atleast_1d(u_grid):
        if u == 1:
            continue
        lhs = float(np.polyval(direct[::-1], u)) if n else 0.0
        rhs = (1.0 - death_migration_pgf(spec, t, u, u)) / (1.0 - u)
        worst = max(worst, abs(lhs - rhs))
    return worst


def max_of_deaths_identity_check(n1: int, n2: int, mu: float, t: float) -> tuple[float, float]:
    """Extinction CDF of the pair versus the CDF of the later of two death-process extinctions."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    q = -math.expm1(-mu * t)
    lhs = q ** (n1 + n2)
    rhs = q**n1 * q**n2  # P{T1 <= t} P{T2 <= t}
    return lhs, rhs


# -- pure migration ---------------------------------------------------------


@dataclass(frozen=True)
class PureMigrationSpec:
    eta1: float
    eta2: float
    n1: int
    n2: int

    def __post_init__(self):
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("migration rates must be positive")
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("counts must be >= 0")

    @property
    def total(self) -> int:
        return self.n1 + self.n2

    def as_bdm(self) -> BdmSpec:
        return BdmSpec(eta1=self.eta1, eta2=self.eta2, initial=(self.n1, self.n2))


def pure_migration_coefficients(spec: PureMigrationSpec, t: float) -> tuple[float, float]:
    """Probabilities that a unit starting in group 1 (resp. 2) is in group 1 at ``t``."""
    s = spec.eta1 + spec.eta2
    e = math.exp(-s * t)
    return (spec.eta2 + spec.eta1 * e) / s, spec.eta2 * (1.0 - e) / s


def pure_migration_pmf(spec: PureMigrationSpec, t: float, k):
    """``P{N1(t) = k}``; values outside ``[0, n1 + n2]`` are 0."""
    a1, a2 = pure_migration_coefficients(spec, t)
    law = np.convolve(binom.pmf(np.arange(spec.n1 + 1), spec.n1, a1),
                      binom.pmf(np.arange(spec.n2 + 1), spec.n2, a2))
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    inside = (ks >= 0) & (ks <= spec.total)
    out = np.where(inside, law[np.clip(ks, 0, spec.total)], 0.0)
    return float(out[0]) if np.ndim(k) == 0 else out


def pure_migration_pgf(spec: PureMigrationSpec, t: float, u: float) -> float:
    a1, a2 = pure_migration_coefficients(spec, t)
    return (1.0 - a1 * (1.0 - u)) ** spec.n1 * (1.0 - a2 * (1.0 - u)) ** spec.n2


def pure_migration_stationary(spec: PureMigrationSpec) -> np.ndarray:
    """``Binomial(n1 + n2, eta2 / (eta1 + eta2))`` on ``0..n1+n2``."""
    return binom.pmf(np.arange(spec.total + 1), spec.total, spec.eta2 / (spec.eta1 + spec.eta2))


def pure_migration_master_rhs(spec: PureMigrationSpec, p: np.ndarray) -> np.ndarray:
    """Right-hand side of the forward equation for ``N1`` given the law ``p`` on ``0..n``."""
    n = spec.total
    k = np.arange(n + 1)
    p = np.asarray(p, dtype=float)
    up = np.zeros(n + 1)
    down = np.zeros(n + 1)
    up[:-1] = p[1:]
    down[1:] = p[:-1]
    return (-(spec.eta1 * k + spec.eta2 * (n - k)) * p + spec.eta1 * (k + 1) * up
            + spec.eta2 * (n - k + 1) * down)


def pure_migration_master_residual(spec: PureMigrationSpec, t: float, k: int, h: float = 1e-5) -> float:
    """``dp_k/dt`` by central differences minus the forward-equation right-hand side."""
    n = spec.total
    if not 0 <= k <= n:
        return 0.0
    ks = np.arange(n + 1)
    dp = (pure_migration_pmf(spec, t + h, ks) - pure_migration_pmf(spec, t - h, ks)) / (2 * h)
    rhs = pure_migration_master_rhs(spec, pure_migration_pmf(spec, t, ks))
    return float(dp[k] - rhs[k])


def pure_migration_pgf_residual(spec: PureMigrationSpec, t: float, u: float, h: float = 1e-5) -> float:
    """Residual of ``G_t = eta2 n (u - 1) G - (eta2 u^2 + (eta1 - eta2) u - eta1) G_u``."""
    G = pure_migration_pgf
    Gt = (G(spec, t + h, u) - G(spec, t - h, u)) / (2 * h)
    Gu = (G(spec, t, u + h) - G(spec, t, u - h)) / (2 * h)
    e1, e2 = spec.eta1, spec.eta2
    rhs = e2 * spec.total * (u - 1) * G(spec, t, u) - (e2 * u * u + (e1 - e2) * u - e1) * Gu
    return Gt - rhs


# -- birth-death from one individual ----------------------------------------


def _check_bd(lam: float, mu: float):
    if lam <= 0 or mu <= 0:
        raise ValueError("birth and death rates must be positive")
    if abs(lam - mu) <= CRITICAL_GUARD:
        raise ValueError("critical case lambda = mu is not supported")


def bd_pmf(lam: float, mu: float, t: float, k):
    """Law at ``t`` of a linear birth-death process started from one individual."""
    _check_bd(lam, mu)
    if t < 0:
        raise ValueError("t must be >= 0")
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if np.any(ks < 0):
        raise ValueError("k must be >= 0")
    E = math.exp(-(lam - mu) * t)
    den = lam - mu * E
    p0 = mu * (1.0 - E) / den
    ratio = lam * (1.0 - E) / den
    with np.errstate(divide="ignore"):
        pos = E * (lam - mu) ** 2 / den**2 * np.power(ratio, np.maximum(ks - 1, 0).astype(float))
    out = np.where(ks == 0, p0, pos)
    return float(out[0]) if np.ndim(k) == 0 else out


def bd_difference_pmf(lambda1: float, mu1: float, lambda2: float, mu2: float, t: float, k):
    """``P{N1(t) - N2(t) = k}`` for independent birth-death processes from one individual each."""
    _check_bd(lambda1, mu1)
    _check_bd(lambda2, mu2)
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))

    def one(l1, m1, l2, m2, kk):
        p1 = bd_pmf(l1, m1, t, [0, 1])
        p2 = bd_pmf(l2, m2, t, [0, 1])
        beta1 = l1 / m1 * p1[0]
        beta2 = l2 / m2 * p2[0]
        denom = 1.0 - beta1 * beta2
        if kk == 0:
            return p1[0] * p2[0] + p1[1] * p2[1] / denom
        pk = bd_pmf(l1, m1, t, kk)
        if l1 == l2 and m1 == m2:
            return pk * (l1 + m1) * p1[0] / (m1 + l1 * p1[0])
        return pk * (p2[0] + beta1 * p2[1] / denom)

    out = np.array([one(lambda1, mu1, lambda2, mu2, int(kk)) if kk >= 0
                    else one(lambda2, mu2, lambda1, mu1, -int(kk)) for kk in ks])
    return float(out[0]) if np.ndim(k) == 0 else out
