"""Random time changes by inverse subordinators.

A subordinator ``H`` with Laplace exponent ``f`` (a Bernstein function)
defines the clock ``L(t) = inf{x >= 0: H(x) >= t}``.  Running a homogeneous
process on this clock replaces the time derivative in its forward equation
by a convolution-type derivative; for the stable family the state law is a
Mittag-Leffler mixture of the classical spectral modes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .specfun import mittag_leffler

__all__ = [
    "BernsteinSpec",
    "InversePath",
    "FractionalStateDistribution",
    "SpectralFallbackWarning",
    "levy_symbol",
    "sample_stable",
    "sample_subordinator",
    "sample_inverse",
    "sample_inverse_path",
    "laplace_of_inverse",
    "time_changed_sample",
    "fractional_distribution",
    "fractional_master_residual",
    "renewal_waiting_survival",
    "sample_first_event_time",
]

DEFAULT_RELATIVE_RESOLUTION = 1e-4
CONDITION_LIMIT = 1e8
TALBOT_TERMS = 32


class SpectralFallbackWarning(RuntimeWarning):
    """The generator was not safely diagonalisable; Laplace inversion was used."""


@dataclass(frozen=True)
class BernsteinSpec:
    """Laplace exponent ``f(x) = killing + drift x + int (1 - e^{-xw}) nu(dw)``.

    ``family`` is ``"stable"`` (``f = x^alpha``), ``"gamma"``
    (``f = shape log(1 + x/rate)``) or ``"tabulated"`` (Lévy tail
    ``nu((w, inf))`` given on ``tail_grid``).  ``alpha = 1`` is accepted for
    the stable family as the degenerate clock ``L(t) = t``.
    """

    family: str
    alpha: float | None = None
    shape: float | None = None
    rate: float | None = None
    tail_grid: tuple | None = None
    tail_values: tuple | None = None
    drift: float = 0.0
    killing: float = 0.0

    def __post_init__(self):
        if self.drift < 0 or self.killing < 0:
            raise ValueError("drift and killing must be >= 0")
        if self.family == "stable":
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ValueError("stable family needs alpha in (0, 1]")
        elif self.family == "gamma":
            if not (self.shape and self.shape > 0 and self.rate and self.rate > 0):
                raise ValueError("gamma family needs positive shape and rate")
        elif self.family == "tabulated":
            g = np.asarray(self.tail_grid, dtype=float)
            v = np.asarray(self.tail_values, dtype=float)
            if g.ndim != 1 or g.shape != v.shape or len(g) < 2:
                raise ValueError("tail_grid and tail_values must be equal-length 1-D")
            if g[0] <= 0 or np.any(np.diff(g) <= 0):
                raise ValueError("tail_grid must be positive and increasing")
            if np.any(v < 0) or np.any(np.diff(v) > 0):
                raise ValueError("a Lévy tail is non-negative and non-increasing")
        else:
            raise ValueError(f"unknown family {self.family!r}")

    @classmethod
    def stable(cls, alpha: float, **kw) -> "BernsteinSpec":
        return cls("stable", alpha=alpha, **kw)

    @classmethod
    def gamma(cls, shape: float, rate: float, **kw) -> "BernsteinSpec":
        return cls("gamma", shape=shape, rate=rate, **kw)

    @property
    def is_deterministic(self) -> bool:
        return self.family == "stable" and self.alpha == 1.0

    @property
    def is_pure_stable(self) -> bool:
        return self.family == "stable" and self.drift == 0 and self.killing == 0


def _tabulated_jump_part(spec: BernsteinSpec, x: float) -> float:
    # int (1 - e^{-xw}) nu(dw) = x int_0^inf e^{-xw} tail(w) dw; tail is
    # linear between grid points, flat below the grid and zero beyond it
    g = np.asarray(spec.tail_grid, dtype=float)
    v = np.asarray(spec.tail_values, dtype=float)
    if x == 0:
        return 0.0

    def tail(w):
        return float(np.interp(w, g, v, left=v[0], right=0.0)) if w <= g[-1] else 0.0

    val = v[0] * (-math.expm1(-x * g[0])) / x
    val += integrate.quad(lambda w: math.exp(-x * w) * tail(w), g[0], g[-1],
                          points=list(g[1:-1])[:50], limit=500, epsabs=1e-13)[0]
    return x * val


def levy_symbol(spec: BernsteinSpec, x: float) -> float:
    """Laplace exponent ``f(x)`` with ``E e^{-x H(s)} = e^{-s f(x)}``."""
    if x < 0:
        raise ValueError("x must be >= 0")
    base = spec.killing + spec.drift * x
    if spec.family == "stable":
        return base + x**spec.alpha
    if spec.family == "gamma":
        return base + spec.shape * math.log1p(x / spec.rate)
    return base + _tabulated_jump_part(spec, x)


def sample_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variates with ``E e^{-sS} = e^{-s^alpha}`` (Kanter's representation)."""
    if alpha == 1.0:
        return np.ones(size)
    U = rng.uniform(0.0, math.pi, size=size)
    E = rng.exponential(1.0, size=size)
    a = alpha
    return (np.sin(a * U) / np.sin(U) ** (1.0 / a)) * (np.sin((1.0 - a) * U) / E) ** ((1.0 - a) / a)


def _increments(spec: BernsteinSpec, dx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if spec.family == "stable":
        jumps = dx ** (1.0 / spec.alpha) * sample_stable(spec.alpha, dx.shape, rng)
    elif spec.family == "gamma":
        jumps = rng.gamma(spec.shape * dx, 1.0 / spec.rate)
    else:
        raise ValueError("tabulated tails support analytic checks only, not exact sampling")
    return jumps + spec.drift * dx


def sample_subordinator(spec: BernsteinSpec, x_grid, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Values of ``H`` on ``x_grid`` for ``size`` paths, shape ``(size, len(x_grid))``.

    A killed subordinator jumps to ``+inf`` at an independent exponential
    time of rate ``killing``.
    """
    x = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(x) <= 0) or x[0] < 0:
        raise ValueError("x_grid must be non-negative and increasing")
    dx = np.diff(np.concatenate([[0.0], x]))
    dx = np.broadcast_to(dx, (size, len(x))).copy()
    nonzero = dx > 0
    inc = np.zeros_like(dx)
    inc[nonzero] = _increments(spec, dx[nonzero], rng)
    H = np.cumsum(inc, axis=1)
    if spec.killing > 0:
        zeta = rng.exponential(1.0 / spec.killing, size=size)
        H[x[None, :] >= zeta[:, None]] = np.inf
    return H


def _gamma_inverse(spec: BernsteinSpec, t: float, size: int, rng, delta: float) -> np.ndarray:
    """Bracket the crossing on a coarse grid, then bisect with the gamma bridge."""
    mean_rate = spec.drift + spec.shape / spec.rate  # E H(x) = x * mean_rate
    step = max(t / mean_rate / 8.0, delta)
    lo_x = np.zeros(size)
    lo_h = np.zeros(size)
    hi_x = np.full(size, np.nan)
    hi_h = np.full(size, np.nan)
    open_ = np.arange(size)
    while len(open_):
        new_h = lo_h[open_] + _increments(spec, np.full(len(open_), step), rng)
        crossed = new_h >= t
        idx = open_[crossed]
        hi_x[idx] = lo_x[idx] + step
        hi_h[idx] = new_h[crossed]
        still = open_[~crossed]
        lo_x[still] += step
        lo_h[still] = new_h[~crossed]
        open_ = still
    width = step
    while width > delta:
        width /= 2.0
        mid_x = lo_x + width
        # gamma bridge: the jump part splits as a Beta fraction
        jump_total = (hi_h - lo_h) - spec.drift * 2.0 * width
        frac = rng.beta(spec.shape * width, spec.shape * width, size=size)
        mid_h = lo_h + spec.drift * width + frac * jump_total
        up = mid_h >= t
        hi_x = np.where(up, mid_x, hi_x)
        hi_h = np.where(up, mid_h, hi_h)
        lo_x = np.where(up, lo_x, mid_x)
        lo_h = np.where(up, lo_h, mid_h)
    return 0.5 * (lo_x + hi_x)


def _stable_drift_inverse(spec: BernsteinSpec, t: float, size: int, rng) -> np.ndarray:
    """Exact draw of ``L(t)`` for ``H(x) = b x + S_x``.

    ``H(x)`` has the law of ``b x + x^{1/alpha} S`` for one stable ``S``,
    which is increasing in ``x``; so ``P{L(t) > x} = P{H(x) < t}`` says
    ``L(t)`` is distributed as the root of ``b x + x^{1/alpha} S = t``.
    """
    S = sample_stable(spec.alpha, size, rng)
    b, p = spec.drift, 1.0 / spec.alpha
    lo = np.zeros(size)
    hi = np.minimum(t / b, (t / S) ** spec.alpha)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = b * mid + mid**p * S < t
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def sample_inverse(spec: BernsteinSpec, t: float, rng: np.random.Generator, size: int = 1,
                   delta: float | None = None) -> np.ndarray:
    """Samples of ``L(t)``.

    Stable clocks are sampled exactly: without drift through
    self-similarity, ``L(t) = (t / S)^alpha``, and with drift by solving
    ``b x + x^{1/alpha} S = t``.  Gamma clocks bracket the crossing on a
    coarse grid and refine it with the gamma bridge down to width ``delta``
    (default ``t * 1e-4``), returning the midpoint of the final bracket.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.zeros(size)
    if delta is None:
        delta = t * DEFAULT_RELATIVE_RESOLUTION
    if spec.family == "stable" and spec.alpha == 1.0:
        out = np.full(size, t / (1.0 + spec.drift))
    elif spec.family == "stable" and spec.drift == 0:
        out = (t / sample_stable(spec.alpha, size, rng)) ** spec.alpha
    elif spec.family == "gamma":
        out = _gamma_inverse(spec, t, size, rng, delta)
    elif spec.family == "stable":
        out = _stable_drift_inverse(spec, t, size, rng)
    else:
        raise ValueError("tabulated tails support analytic checks only, not sampling")
    if spec.killing > 0:
        out = np.minimum(out, rng.exponential(1.0 / spec.killing, size=size))
    return out


@dataclass
class InversePath:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be increasing")
        if np.any(self.values < 0) or np.any(np.diff(self.values) < 0):
            raise ValueError("an inverse subordinator path is non-negative and non-decreasing")


def sample_inverse_path(spec: BernsteinSpec, t_grid, rng: np.random.Generator,
                        delta: float | None = None) -> InversePath:
    """One path of ``L`` on ``t_grid`` from a single subordinator path at x-resolution ``delta``."""
    t_grid = np.asarray(t_grid, dtype=float)
    t_max = float(t_grid[-1])
    if delta is None:
        delta = max(t_max, 1e-12) * DEFAULT_RELATIVE_RESOLUTION
    if spec.is_deterministic:
        return InversePath(t_grid, t_grid / (1.0 + spec.drift))
    xs, hs = [np.zeros(1)], [np.zeros(1)]
    x0, h0 = 0.0, 0.0
    while h0 < t_max:
        x = x0 + delta * np.arange(1, 4097)
        h = h0 + np.cumsum(_increments(spec, np.full(len(x), delta), rng))
        if spec.killing > 0:
            zeta = rng.exponential(1.0 / spec.killing)
            h[x >= x0 + zeta] = np.inf  # memoryless: restart the clock per block
        xs.append(x)
        hs.append(h)
        x0, h0 = float(x[-1]), float(h[-1])
    X = np.concatenate(xs)
    H = np.concatenate(hs)
    k = np.searchsorted(H, t_grid, side="left")
    values = np.where(t_grid <= 0, 0.0, X[np.minimum(k, len(X) - 1)] - 0.5 * delta)
    return InversePath(t_grid, np.maximum(values, 0.0))


def laplace_of_inverse(spec: BernsteinSpec, t: float, y: float) -> float:
    """``E e^{-y L(t)} = E_alpha(-y t^alpha)`` for the pure stable clock."""
    if not spec.is_pure_stable:
        raise ValueError("closed form shipped for the stable family without drift or killing only")
    if y < 0 or t < 0:
        raise ValueError("t and y must be >= 0")
    return float(mittag_leffler(spec.alpha, -y * t**spec.alpha))


def _base_sampler(base) -> Callable[[np.ndarray, np.random.Generator], np.ndarray]:
    from . import bdm, interact, skellam

    if callable(base):
        return base
    if isinstance(base, interact.InteractingSkellamSpec):
        if not base.is_homogeneous:
            raise ValueError("time change needs a homogeneous base process")
        return lambda tau, rng: interact.sample_endpoints_at(base, tau, rng)
    if isinstance(base, bdm.BdmSpec):
        return lambda tau, rng: bdm.sample_endpoints(base, tau, len(tau), rng)
    if isinstance(base, bdm.PureMigrationSpec):
        b = base.as_bdm()
        return lambda tau, rng: bdm.sample_endpoints(b, tau, len(tau), rng)[:, 0]
    if isinstance(base, skellam.NhSkellamSpec):
        if not (base.rate_up.is_constant and base.rate_down.is_constant):
            raise ValueError("time change needs a homogeneous base process")
        up, down = base.rate_up.constant_value(), base.rate_down.constant_value()
        return lambda tau, rng: base.initial + rng.poisson(up * tau) - rng.poisson(down * tau)
    raise TypeError(f"no endpoint sampler for {type(base).__name__}")


def time_changed_sample(base, spec: BernsteinSpec, t: float, rng: np.random.Generator,
                        size: int = 1, delta: float | None = None) -> np.ndarray:
    """Endpoints of ``N(L(t))`` for ``size`` independent replicates.

    ``base`` is a homogeneous spec from ``interact``, ``bdm`` or ``skellam``,
    or a callable ``(horizons, rng) -> endpoints``.  The clock is drawn
    first and independently of the base process.
    """
    sampler = _base_sampler(base)
    tau = sample_inverse(spec, t, rng, size=size, delta=delta)
    return sampler(tau, rng)


@dataclass(frozen=True)
class FractionalStateDistribution:
    """``q(t) = sum_j coefficients[:, j] E_alpha(eigenvalues[j] t^alpha)``."""

    states: tuple
    coefficients: np.ndarray
    eigenvalues: np.ndarray
    alpha: float
    t: float
    pmf: np.ndarray
    method: str = "spectral"


def _talbot(F, t: float, M: int = TALBOT_TERMS) -> np.ndarray:
    """Fixed-Talbot inversion of a vector-valued Laplace transform at ``t > 0``."""
    r = 2.0 * M / (5.0 * t)
    total = 0.5 * np.exp(r * t) * F(complex(r)).real
    for k in range(1, M):
        th = k * math.pi / M
        cot = math.cos(th) / math.sin(th)
        s = r * th * (cot + 1j)
        sigma = th + (th * cot - 1.0) * cot
        total = total + (np.exp(t * s) * F(s) * (1.0 + 1j * sigma)).real
    return r / M * total


def fractional_distribution(gen, alpha: float, t: float, initial) -> FractionalStateDistribution:
    """State law at ``t`` of a finite chain run on the inverse ``alpha``-stable clock.

    Diagonalises the transposed generator, ``p(x) = sum_j c_j e^{theta_j x}``,
    and replaces each ``e^{theta_j x}`` by ``E_alpha(theta_j t^alpha)``.  If
    the eigenvector matrix is ill-conditioned (condition number above 1e8) or
    the spectrum is not real, the Laplace transform
    ``s^{alpha-1} (s^alpha - Q^T)^{-1} p0`` is inverted numerically instead
    and a :class:`SpectralFallbackWarning` is issued.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if t < 0:
        raise ValueError("t must be >= 0")
    p0 = initial.astype(float) if isinstance(initial, np.ndarray) else gen.point_mass(initial)
    A = gen.Q.T
    theta, V = np.linalg.eig(A)
    cond = np.linalg.cond(V)
    real = np.max(np.abs(theta.imag), initial=0.0) <= 1e-9 * max(1.0, np.abs(theta).max(initial=0.0))
    if cond <= CONDITION_LIMIT and real:
        theta = theta.real
        V = V.real
        w = np.linalg.solve(V, p0)
        coef = V * w[None, :]
        if t == 0:
            pmf = p0.copy()
        else:
            z = np.minimum(theta, 0.0) * t**alpha
            ml = np.array([mittag_leffler(alpha, float(v)) for v in z])
            pmf = coef @ ml
        method = "spectral"
    else:
        warnings.warn(f"generator eigenbasis condition {cond:.2e}; using Laplace inversion",
                      SpectralFallbackWarning, stacklevel=2)
        n = gen.size
        coef = np.zeros((n, 0))
        theta = np.zeros(0)
        if t == 0:
            pmf = p0.copy()
        else:
            def F(s):
                sa = s**alpha
                return s ** (alpha - 1) * np.linalg.solve(sa * np.eye(n) - A, p0.astype(complex))

            pmf = _talbot(F, t)
        method = "laplace"
    pmf = np.where(np.abs(pmf) < 1e-12, np.maximum(pmf, 0.0), pmf)
    pmf = np.clip(pmf, 0.0, None)
    return FractionalStateDistribution(gen.states, coef, theta, alpha, t, pmf, method)


def fractional_master_residual(dist: FractionalStateDistribution, gen) -> float:
    """``max |D^alpha q - Q^T q|`` with ``D^alpha`` applied through ``D^alpha E_alpha(theta t^alpha) = theta E_alpha(theta t^alpha)``."""
    if dist.method != "spectral":
        raise ValueError("term-wise derivative needs the spectral form")
    z = np.minimum(dist.eigenvalues, 0.0) * dist.t**dist.alpha
    ml = np.array([mittag_leffler(dist.alpha, float(v)) for v in z])
    q = dist.coefficients @ ml
    dq = dist.coefficients @ (dist.eigenvalues * ml)
    return float(np.max(np.abs(dq - gen.Q.T @ q)))


def renewal_waiting_survival(spec: BernsteinSpec, lambda_bar: float, t: float) -> float:
    """``P{J > t} = E_alpha(-lambda_bar t^alpha)`` for the first event of a time-changed Poisson count."""
    if lambda_bar <= 0:
        raise ValueError("lambda_bar must be positive")
    return laplace_of_inverse(spec, t, lambda_bar)


def sample_first_event_time(spec: BernsteinSpec, lambda_bar: float, size: int,
                            rng: np.random.Generator) -> np.ndarray:
    """First event time of ``N(L(t))`` with ``N`` Poisson of rate ``lambda_bar``.

    The base process fires at ``E ~ Exp(lambda_bar)``; the time-changed one
    fires when ``L`` passes ``E``, i.e. at ``H(E)``.  For the pure stable
    clock ``H(E) = E^{1/alpha} S`` exactly.
    """
    if not spec.is_pure_stable:
        raise ValueError("exact first-event sampling is shipped for the pure stable clock")
    E = rng.exponential(1.0 / lambda_bar, size=size)
    return E ** (1.0 / spec.alpha) * sample_stable(spec.alpha, size, rng)
