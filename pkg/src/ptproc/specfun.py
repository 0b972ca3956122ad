"""Special functions used by the closed-form distributions.

Only real, non-negative Bessel arguments and the negative real axis of the
one-parameter Mittag-Leffler function are needed, so the implementations
are restricted to those branches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

__all__ = [
    "SeriesControl",
    "SeriesError",
    "bessel_i",
    "log_bessel_i",
    "mittag_leffler",
    "harmonic_number",
    "alternating_binomial_sum",
]

EXACT_BINOMIAL_LIMIT = 60
# |z| above which the alternating power series loses too many digits
_ML_SERIES_LIMIT = 1.0


class SeriesError(ArithmeticError):
    """A series or quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class SeriesControl:
    abs_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_CONTROL = SeriesControl()


def log_bessel_i(n: int, x: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Natural log of the modified Bessel function ``I_n(x)`` for ``x >= 0``.

    The power series is summed in log space relative to its largest term so
    arguments in the hundreds do not overflow.  Returns ``-inf`` when
    ``I_n(x) = 0`` (``x = 0`` and ``n != 0``).
    """
    n = abs(int(n))
    if x < 0:
        raise ValueError("bessel_i is implemented for x >= 0 only")
    if x == 0:
        return 0.0 if n == 0 else -math.inf
    lhalf = math.log(x / 2.0)
    # terms t_k = (x/2)^(2k+n) / (k! (k+n)!) peak near k* solving k(k+n) = (x/2)^2
    kstar = int(0.5 * (-n + math.sqrt(n * n + x * x)))

    def lt(k):
        return (2 * k + n) * lhalf - math.lgamma(k + 1) - math.lgamma(k + n + 1)

    lmax = lt(kstar)
    total = 0.0
    # walk upward then downward from the peak; both tails decay monotonically
    k, terms = kstar, 0
    while True:
        w = math.exp(lt(k) - lmax)
        total += w
        terms += 1
        if w < ctl.abs_tol * total:
            break
        k += 1
        if terms > ctl.max_terms:
            raise SeriesError(f"I_{n}({x}) series did not converge in {ctl.max_terms} terms")
    k = kstar - 1
    while k >= 0:
        w = math.exp(lt(k) - lmax)
        total += w
        terms += 1
        if w < ctl.abs_tol * total:
            break
        k -= 1
        if terms > ctl.max_terms:
            raise SeriesError(f"I_{n}({x}) series did not converge in {ctl.max_terms} terms")
    return lmax + math.log(total)


def bessel_i(n: int, x: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Modified Bessel function of the first kind, integer order, ``x >= 0``."""
    return math.exp(log_bessel_i(n, x, ctl))


def _ml_series(alpha: float, z: float, ctl: SeriesControl) -> float:
    total, k = 0.0, 0
    while True:
        term = z**k / math.gamma(alpha * k + 1) if k < 170 else 0.0
        total += term
        if abs(term) < ctl.abs_tol and k > 0:
            return total
        k += 1
        if k > ctl.max_terms or alpha * k + 1 > 171:
            raise SeriesError(f"Mittag-Leffler series for z={z} did not converge")


def _ml_integral(alpha: float, x: float, ctl: SeriesControl) -> float:
    # E_a(-x) = sin(a pi)/(a pi) * int_0^inf exp(-(x s)^(1/a)) / (s^2 + 2 s cos(a pi) + 1) ds.
    # The kernel is a Lorentzian of width sin(a pi), a near-pole as a -> 1.  The angle
    # substitution s = sin(phi) / (w cos(phi) - c sin(phi)) flattens it exactly:
    # E_a(-x) = 1/(a pi) * int_0^{phi(inf)} exp(-(x s(phi))^(1/a)) dphi.
    # 1 + cos(a pi) is computed from 1 - a so it keeps its digits as a -> 1
    delta = 1.0 - alpha
    w = math.sin(delta * math.pi)
    opc = 2.0 * math.sin(0.5 * delta * math.pi) ** 2
    inv = 1.0 / alpha

    def phi_of(s):
        return math.atan2(s * w, (1.0 - s) + s * opc)

    def f(phi):
        sn, cs = math.sin(phi), math.cos(phi)
        return math.exp(-((x * sn / (w * cs + sn - opc * sn)) ** inv))

    # beyond s_max the exponential factor is below 1e-300
    s_max = 700.0**alpha / x
    # the decay happens over s ~ 1/x, which can be a tiny window near phi = 0
    marks = {1.0} | {10.0**j / x for j in range(-1, 4)} | {3.0 * 10.0**j / x for j in range(-1, 3)}
    knots = sorted(phi_of(s) for s in marks if s < s_max) + [phi_of(s_max)]
    # intervals spanning many decades of phi hide sharp features from quad; split them geometrically
    edges = [0.0]
    for b in knots:
        a = edges[-1]
        while a > 0 and b > 10.0 * a:
            a *= 10.0
            edges.append(a)
        edges.append(b)
    val, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 1e-14 * b:
            continue
        v, e = integrate.quad(f, a, b, epsabs=ctl.abs_tol * 1e-2, epsrel=1e-13, limit=200)
        val += v
        err += e
    if err > 1e3 * ctl.abs_tol:
        raise SeriesError(f"Mittag-Leffler quadrature error {err:.2e} at x={x}")
    return val / (alpha * math.pi)


def _mittag_leffler_scalar(alpha: float, z: float, ctl: SeriesControl) -> float:
    if z > 0:
        raise ValueError("mittag_leffler is implemented for z <= 0 only")
    if alpha == 1.0:
        return math.exp(z)
    if z == 0:
        return 1.0
    if -z <= _ML_SERIES_LIMIT:
        return _ml_series(alpha, z, ctl)
    return _ml_integral(alpha, -z, ctl)


def mittag_leffler(alpha: float, z, ctl: SeriesControl = DEFAULT_CONTROL):
    """One-parameter Mittag-Leffler function ``E_alpha(z)`` for ``z <= 0``.

    Small ``|z|`` uses the power series; larger ``|z|`` uses the completely
    monotone integral representation, whose integrand is positive and so
    free of cancellation.  Accepts scalars or arrays.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    za = np.asarray(z, dtype=float)
    if za.ndim == 0:
        return _mittag_leffler_scalar(alpha, float(za), ctl)
    if alpha == 1.0:
        if np.any(za > 0):
            raise ValueError("mittag_leffler is implemented for z <= 0 only")
        return np.exp(za)
    return np.array([_mittag_leffler_scalar(alpha, float(v), ctl) for v in za.ravel()]).reshape(za.shape)


def harmonic_number(n: int) -> Fraction:
    """``H_n = 1 + 1/2 + ... + 1/n`` as an exact rational."""
    if n < 1:
        raise ValueError("harmonic_number needs n >= 1")
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0))


def alternating_binomial_sum(n: int) -> Fraction:
    """``sum_{k=1}^n C(n, k) (-1)^k / k`` in exact rational arithmetic.

    Equals ``-H_n``; exact evaluation is offered up to ``n = 60`` where the
    binomial coefficients are still cheap and the cancellation is fully
    controlled.
    """
    if n < 1:
        raise ValueError("alternating_binomial_sum needs n >= 1")
    if n > EXACT_BINOMIAL_LIMIT:
        raise OverflowError(f"exact evaluation is limited to n <= {EXACT_BINOMIAL_LIMIT}")
    return sum((Fraction((-1) ** k * math.comb(n, k), k) for k in range(1, n + 1)), Fraction(0))
