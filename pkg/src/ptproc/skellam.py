"""Non-homogeneous Poisson and Skellam processes: laws, PGFs and samplers."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from .ratefn import RateFunction
from .specfun import log_bessel_i

__all__ = [
    "NhPoissonSpec",
    "NhSkellamSpec",
    "GeneralizedSkellamSpec",
    "SamplePath",
    "TruncationError",
    "poisson_pmf",
    "poisson_tail_bound",
    "poisson_tail_count",
    "skellam_pmf",
    "skellam_pmf_cumulative",
    "skellam_support",
    "skellam_pgf",
    "generalized_pgf",
    "thin",
    "sample_nh_poisson",
    "sample_nh_poisson_counts",
    "sample_skellam",
    "sample_skellam_endpoints",
]

LOG_FLOOR = -745.0


class TruncationError(ValueError):
    """An infinite sum was cut before its neglected mass met the tolerance."""

    def __init__(self, message: str, bound: float):
        super().__init__(f"{message} (neglected mass bound {bound:.3e})")
        self.bound = bound


@dataclass(frozen=True)
class NhPoissonSpec:
    rate: RateFunction


@dataclass(frozen=True)
class NhSkellamSpec:
    """``initial + N_up(t) - N_down(t)`` with independent Poisson streams."""

    rate_up: RateFunction
    rate_down: RateFunction
    initial: int = 0


@dataclass(frozen=True)
class GeneralizedSkellamSpec:
    """``initial + sum_i i * N_i(t)`` over a finite jump set without 0."""

    rates: Mapping[int, RateFunction]
    initial: int = 0

    def __post_init__(self):
        if not self.rates:
            raise ValueError("jump set must be non-empty")
        if 0 in self.rates:
            raise ValueError("0 is not a valid jump size")

    @property
    def jumps(self) -> list[int]:
        return sorted(self.rates)


@dataclass
class SamplePath:
    """Piecewise-constant lattice path: ordered event times and jump vectors."""

    times: np.ndarray
    jumps: np.ndarray
    initial: tuple
    horizon: float
    labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        d = len(self.initial)
        self.jumps = np.asarray(self.jumps, dtype=np.int64).reshape(len(self.times), d)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("event times must be strictly increasing")
        if len(self.times) and (self.times[0] < 0 or self.times[-1] > self.horizon):
            raise ValueError("event times must lie in [0, horizon]")

    @property
    def dim(self) -> int:
        return len(self.initial)

    def states(self) -> np.ndarray:
        """State after each event, shape ``(n_events, dim)``."""
        return np.asarray(self.initial) + np.cumsum(self.jumps, axis=0)

    def endpoint(self) -> tuple:
        return tuple(int(x) for x in np.asarray(self.initial) + self.jumps.sum(axis=0))

    def state_at(self, t: float) -> tuple:
        k = np.searchsorted(self.times, t, side="right")
        return tuple(int(x) for x in np.asarray(self.initial) + self.jumps[:k].sum(axis=0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + [f"d{i + 1}" for i in range(self.dim)])
        for t, j in zip(self.times, self.jumps):
            w.writerow([repr(float(t))] + [int(x) for x in j])
        return buf.getvalue()


# -- laws -------------------------------------------------------------------


def _poisson_logpmf(lam: float, k):
    k = np.asarray(k)
    if lam == 0:
        return np.where(k == 0, 0.0, -np.inf)
    return np.where(k >= 0, k * math.log(lam) - lam - gammaln(np.maximum(k, 0) + 1), -np.inf)


def poisson_pmf(spec: NhPoissonSpec, t: float, k):
    """``P{N(t) = k}`` for ``N(t) ~ Poisson(Lambda(t))``, computed in log space."""
    if np.any(np.asarray(k) < 0):
        raise ValueError("count must be >= 0")
    lam = spec.rate.cumulative(t)
    out = np.exp(np.maximum(_poisson_logpmf(lam, k), LOG_FLOOR))
    out = np.where(np.isneginf(_poisson_logpmf(lam, k)), 0.0, out)
    return float(out) if out.ndim == 0 else out


def poisson_tail_bound(lam: float, n: int) -> float:
    """Certified upper bound on ``P{Poisson(lam) > n}`` (1 when no bound applies)."""
    if lam <= 0:
        return 0.0
    if n + 2 <= lam:
        return 1.0
    lp = (n + 1) * math.log(lam) - lam - math.lgamma(n + 2)
    return math.exp(lp) / (1.0 - lam / (n + 2))


def poisson_tail_count(lam: float, eps: float = 1e-12) -> int:
    """Smallest ``N`` with ``P{Poisson(lam) > N} <= eps``, by a certified bound.

    Uses ``P{X >= N+1} <= pmf(N+1) / (1 - lam/(N+2))`` for ``N + 2 > lam``.
    """
    if lam <= 0:
        return 0
    n = max(int(lam), 0)
    while poisson_tail_bound(lam, n) > eps:
        n += 1
    return n


def skellam_pmf_cumulative(lam_up: float, lam_down: float, k):
    """``P{N_up - N_down = k}`` for Poisson means ``lam_up`` and ``lam_down``."""
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    out = np.empty(len(ks))
    if lam_up == 0 or lam_down == 0:
        # one-sided: shifted Poisson law
        if lam_down == 0:
            lp = _poisson_logpmf(lam_up, ks)
        else:
            lp = _poisson_logpmf(lam_down, -ks)
        out = np.where(np.isneginf(lp), 0.0, np.exp(np.maximum(lp, LOG_FLOOR)))
    else:
        # product of square roots avoids denormal underflow of lam_up * lam_down
        x = 2.0 * math.sqrt(lam_up) * math.sqrt(lam_down)
        half_log_ratio = 0.5 * (math.log(lam_up) - math.log(lam_down))
        for i, n in enumerate(ks):
            lp = -(lam_up + lam_down) + n * half_log_ratio + log_bessel_i(int(n), x)
            out[i] = math.exp(lp) if lp > LOG_FLOOR else 0.0
    return float(out[0]) if np.ndim(k) == 0 else out


def skellam_pmf(spec: NhSkellamSpec, t: float, n):
    """``P{S(t) = n}`` via the modified-Bessel closed form."""
    lu = spec.rate_up.cumulative(t)
    ld = spec.rate_down.cumulative(t)
    return skellam_pmf_cumulative(lu, ld, np.asarray(n) - spec.initial)


def skellam_support(spec: NhSkellamSpec, t: float, eps: float = 1e-12) -> np.ndarray:
    """Integers carrying all but at most ``eps`` of the law of ``S(t)``."""
    lam = spec.rate_up.cumulative(t) + spec.rate_down.cumulative(t)
    reach = poisson_tail_count(lam, eps)
    lo = -reach if spec.rate_down.cumulative(t) > 0 else 0
    hi = reach if spec.rate_up.cumulative(t) > 0 else 0
    return np.arange(spec.initial + lo, spec.initial + hi + 1)


def skellam_pgf(spec: NhSkellamSpec, t: float, w: float) -> float:
    """``E w^{S(t)}`` for any ``w > 0``."""
    if w <= 0:
        raise ValueError("w must be positive")
    lu = spec.rate_up.cumulative(t)
    ld = spec.rate_down.cumulative(t)
    return w**spec.initial * math.exp(-lu * (1.0 - w) - ld * (1.0 - 1.0 / w))


def generalized_pgf(spec: GeneralizedSkellamSpec, t: float, u: float) -> float:
    """``E u^{S(t)} = u^initial * exp(-sum_i Lambda_i(t) (1 - u^i))`` for ``u`` in (0, 1]."""
    if not 0 < u <= 1:
        raise ValueError("u must lie in (0, 1]")
    expo = sum(r.cumulative(t) * (1.0 - u**i) for i, r in spec.rates.items())
    return u**spec.initial * math.exp(-expo)


# -- samplers ---------------------------------------------------------------


def thin(rate: RateFunction, horizon: float, size: int, rng: np.random.Generator,
         start: float = 0.0):
    """Vectorised Lewis-Shedler thinning for ``size`` independent streams.

    Returns ``(replicate_ids, times)`` sorted by replicate then time.
    Candidates are drawn interval by interval under the exact supremum of
    the rate on each breakpoint-delimited interval.
    """
    ids, times = [], []
    for a, b, m in rate.majorant_intervals(horizon):
        if b <= start or m == 0:
            continue
        a = max(a, start)
        counts = rng.poisson(m * (b - a), size=size)
        tot = int(counts.sum())
        if tot == 0:
            continue
        rid = np.repeat(np.arange(size), counts)
        tt = rng.uniform(a, b, size=tot)
        if not rate.is_constant:
            keep = rng.uniform(0.0, m, size=tot) < rate.value(tt)
            rid, tt = rid[keep], tt[keep]
        ids.append(rid)
        times.append(tt)
    if not ids:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    rid = np.concatenate(ids)
    tt = np.concatenate(times)
    order = np.lexsort((tt, rid))
    return rid[order], tt[order]


def sample_nh_poisson(spec: NhPoissonSpec, horizon: float, rng: np.random.Generator) -> SamplePath:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    _, tt = thin(spec.rate, horizon, 1, rng)
    return SamplePath(tt, np.ones((len(tt), 1)), (0,), horizon)


def sample_nh_poisson_counts(spec: NhPoissonSpec, horizon: float, size: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Endpoint counts of ``size`` independent thinned paths."""
    rid, _ = thin(spec.rate, horizon, size, rng)
    return np.bincount(rid, minlength=size)


def sample_skellam(spec: NhSkellamSpec, horizon: float, rng: np.random.Generator) -> SamplePath:
    """Superpose a thinned up-stream (+1) and down-stream (-1) in time order."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    _, up = thin(spec.rate_up, horizon, 1, rng)
    _, down = thin(spec.rate_down, horizon, 1, rng)
    tt = np.concatenate([up, down])
    jj = np.concatenate([np.ones(len(up)), -np.ones(len(down))])
    order = np.argsort(tt, kind="stable")
    return SamplePath(tt[order], jj[order], (spec.initial,), horizon)


def sample_skellam_endpoints(spec: NhSkellamSpec, horizon: float, size: int,
                             rng: np.random.Generator) -> np.ndarray:
    """``S(horizon)`` for ``size`` independent thinned paths."""
    up, _ = thin(spec.rate_up, horizon, size, rng)
    down, _ = thin(spec.rate_down, horizon, size, rng)
    return spec.initial + np.bincount(up, minlength=size) - np.bincount(down, minlength=size)
