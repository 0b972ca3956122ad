"""Interacting Skellam-type vector processes.

Two groups change state through eight simultaneous-event types (concordant
and discordant unit jumps, single-group jumps, and migrations).  The vector
splits into four independent classical Skellam processes, which gives the
PGF, marginal laws, joint pmf and covariance in closed form.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import signal

from . import ratefn
from .ratefn import RateFunction
from .skellam import (
    GeneralizedSkellamSpec,
    NhSkellamSpec,
    SamplePath,
    TruncationError,
    poisson_tail_bound,
    poisson_tail_count,
    skellam_pmf_cumulative,
    thin,
)

__all__ = [
    "InteractingSkellamSpec",
    "SkellamDecomposition",
    "GeneralizedInteractSpec",
    "PoissonTerm",
    "TrivariateSpec",
    "TrivariateDecomposition",
    "JUMP_TYPES",
    "event_menu",
    "joint_pgf",
    "increment_pgf",
    "decompose",
    "marginal_rates",
    "joint_pmf",
    "joint_pmf_table",
    "covariance",
    "event_rate",
    "sample_path",
    "sample_endpoints",
    "sample_endpoints_at",
    "compound_representation",
    "linear_combination",
    "generalized_marginals",
    "order_k_grouping",
    "trivariate_decompose",
    "trivariate_event_menu",
    "sample_trivariate_endpoints",
]

# order matches the compound-Poisson jump law
JUMP_TYPES = ((1, 1), (-1, -1), (1, -1), (-1, 1), (1, 0), (0, 1), (-1, 0), (0, -1))
TRUNCATION_EPS = 1e-12


@dataclass(frozen=True)
class InteractingSkellamSpec:
    lambda1: RateFunction
    lambda2: RateFunction
    mu1: RateFunction
    mu2: RateFunction
    delta1: RateFunction
    delta2: RateFunction
    eta12: RateFunction
    eta21: RateFunction
    initial: tuple = (0, 0)

    RATE_NAMES = ("lambda1", "lambda2", "mu1", "mu2", "delta1", "delta2", "eta12", "eta21")

    @classmethod
    def constant(cls, lambda1=0.0, lambda2=0.0, mu1=0.0, mu2=0.0, delta1=0.0, delta2=0.0,
                 eta12=0.0, eta21=0.0, initial=(0, 0)) -> "InteractingSkellamSpec":
        vals = dict(lambda1=lambda1, lambda2=lambda2, mu1=mu1, mu2=mu2, delta1=delta1,
                    delta2=delta2, eta12=eta12, eta21=eta21)
        return cls(**{k: ratefn.constant(v) for k, v in vals.items()}, initial=tuple(initial))

    @property
    def is_homogeneous(self) -> bool:
        return all(getattr(self, k).is_constant for k in self.RATE_NAMES)


def _memo(spec, key: str, build):
    # specs are frozen, so derived rate algebra can live on the instance
    cache = spec.__dict__.setdefault("_derived", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def event_menu(spec: InteractingSkellamSpec) -> list[tuple[tuple[int, int], RateFunction]]:
    """The eight jump vectors with their instantaneous rates."""
    return list(_memo(spec, "menu", lambda: _build_menu(spec)))


def _build_menu(spec):
    s = spec
    return [
        ((1, 1), s.lambda1 * s.lambda2),
        ((-1, -1), s.mu1 * s.mu2),
        ((1, -1), s.lambda1 * s.mu2 + s.eta21),
        ((-1, 1), s.mu1 * s.lambda2 + s.eta12),
        ((1, 0), s.lambda1 * s.delta2),
        ((0, 1), s.delta1 * s.lambda2),
        ((-1, 0), s.mu1 * s.delta2),
        ((0, -1), s.delta1 * s.mu2),
    ]


def _check_uv(u, v):
    if u <= 0 or v <= 0:
        raise ValueError("u and v must be positive")


def _exponent(spec, s, t, u, v) -> float:
    return sum(r.integral(s, t) * (1.0 - u**i * v**j) for (i, j), r in event_menu(spec))


def joint_pgf(spec: InteractingSkellamSpec, t: float, u: float, v: float) -> float:
    """``E u^{N1(t)} v^{N2(t)}``.  Rate integrals are exact piecewise-polynomial integrals."""
    _check_uv(u, v)
    n1, n2 = spec.initial
    return u**n1 * v**n2 * math.exp(-_exponent(spec, 0.0, t, u, v))


def increment_pgf(spec: InteractingSkellamSpec, s: float, t: float, u: float, v: float) -> float:
    """PGF of ``(N1(t) - N1(s), N2(t) - N2(s))``."""
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    _check_uv(u, v)
    return math.exp(-_exponent(spec, s, t, u, v))


@dataclass(frozen=True)
class SkellamDecomposition:
    """``N1 = S1 + S3 + S4`` and ``N2 = S2 + S3 - S4`` with independent parts."""

    s1: NhSkellamSpec
    s2: NhSkellamSpec
    s3: NhSkellamSpec
    s4: NhSkellamSpec

    def parts(self):
        return (self.s1, self.s2, self.s3, self.s4)

    def cumulative(self, t: float) -> list[tuple[float, float]]:
        return [(p.rate_up.cumulative(t), p.rate_down.cumulative(t)) for p in self.parts()]


def decompose(spec: InteractingSkellamSpec) -> SkellamDecomposition:
    s = spec
    n1, n2 = spec.initial
    return SkellamDecomposition(
        NhSkellamSpec(s.lambda1 * s.delta2, s.mu1 * s.delta2, n1),
        NhSkellamSpec(s.delta1 * s.lambda2, s.delta1 * s.mu2, n2),
        NhSkellamSpec(s.lambda1 * s.lambda2, s.mu1 * s.mu2, 0),
        NhSkellamSpec(s.lambda1 * s.mu2 + s.eta21, s.mu1 * s.lambda2 + s.eta12, 0),
    )


def marginal_rates(spec: InteractingSkellamSpec) -> tuple[NhSkellamSpec, NhSkellamSpec]:
    s = spec
    b2 = s.lambda2 + s.mu2 + s.delta2
    b1 = s.lambda1 + s.mu1 + s.delta1
    n1, n2 = spec.initial
    return (
        NhSkellamSpec(s.lambda1 * b2 + s.eta21, s.mu1 * b2 + s.eta12, n1),
        NhSkellamSpec(s.lambda2 * b1 + s.eta12, s.mu2 * b1 + s.eta21, n2),
    )


@functools.lru_cache(maxsize=256)
def _range_pmf_cached(lu: float, ld: float, lo: int, hi: int) -> np.ndarray:
    out = skellam_pmf_cumulative(lu, ld, np.arange(lo, hi + 1))
    out.setflags(write=False)
    return out


def _range_pmf(lu: float, ld: float, lo: int, hi: int) -> np.ndarray:
    # windowed sweeps revisit the same component ranges many times
    return _range_pmf_cached(float(lu), float(ld), int(lo), int(hi))


def _reach(lu: float, ld: float, eps: float) -> tuple[int, int]:
    r = poisson_tail_count(lu + ld, eps)
    return (-r if ld > 0 else 0), (r if lu > 0 else 0)


def joint_pmf(spec: InteractingSkellamSpec, t: float, m: int, n: int,
              truncation: int | None = None) -> float:
    """``P{N1(t) = m, N2(t) = n}`` by the Bessel double sum.

    Sums over the values ``h`` of ``S1`` and ``k`` of ``S2`` within
    ``truncation`` of their starting points; the ``S3``/``S4`` indices
    ``(m-h+n-k)/2`` and ``(m-h-n+k)/2`` must be integers, so only pairs with
    ``m-h+n-k`` even contribute.
    """
    dec = decompose(spec)
    (l1u, l1d), (l2u, l2d), (l3u, l3d), (l4u, l4d) = dec.cumulative(t)
    n1, n2 = spec.initial
    if truncation is None:
        truncation = max(poisson_tail_count(l1u + l1d, TRUNCATION_EPS / 2),
                         poisson_tail_count(l2u + l2d, TRUNCATION_EPS / 2))
    bound = poisson_tail_bound(l1u + l1d, truncation) + poisson_tail_bound(l2u + l2d, truncation)
    if bound > TRUNCATION_EPS:
        raise TruncationError(f"truncation {truncation} too small for joint_pmf", bound)
    T = truncation
    h = np.arange(-T, T + 1)
    p1 = _range_pmf(l1u, l1d, -T, T)
    p2 = _range_pmf(l2u, l2d, -T, T)
    a = m - n1 - h[:, None]
    b = n - n2 - h[None, :]
    even = (a + b) % 2 == 0
    s3 = np.where(even, (a + b) // 2, 0)
    s4 = np.where(even, (a - b) // 2, 0)
    lo3, hi3 = int(s3.min()), int(s3.max())
    lo4, hi4 = int(s4.min()), int(s4.max())
    p3 = _range_pmf(l3u, l3d, lo3, hi3)
    p4 = _range_pmf(l4u, l4d, lo4, hi4)
    terms = np.outer(p1, p2) * p3[s3 - lo3] * p4[s4 - lo4]
    return float(np.sum(np.where(even, terms, 0.0)))



def joint_pmf_table(spec: InteractingSkellamSpec, t: float, m_values: Sequence[int],
                    n_values: Sequence[int]) -> np.ndarray:
    """Joint pmf on a rectangular window, ``out[i, j] = P{N1 = m_i, N2 = n_j}``.

    Same Bessel representation as :func:`joint_pmf`, evaluated as one 2-D
    convolution of the ``(S1, S2)`` product law with the ``(S3+S4, S3-S4)``
    lattice law.
    """
    dec = decompose(spec)
    (l1u, l1d), (l2u, l2d), (l3u, l3d), (l4u, l4d) = dec.cumulative(t)
    n1, n2 = spec.initial
    eps = TRUNCATION_EPS / 4
    r1 = _reach(l1u, l1d, eps)
    r2 = _reach(l2u, l2d, eps)
    r3 = _reach(l3u, l3d, eps)
    r4 = _reach(l4u, l4d, eps)
    p1 = _range_pmf(l1u, l1d, *r1)
    p2 = _range_pmf(l2u, l2d, *r2)
    p3 = _range_pmf(l3u, l3d, *r3)
    p4 = _range_pmf(l4u, l4d, *r4)
    # lattice law of (S3 + S4, S3 - S4)
    amin, amax = r3[0] + r4[0], r3[1] + r4[1]
    bmin, bmax = r3[0] - r4[1], r3[1] - r4[0]
    lat = np.zeros((amax - amin + 1, bmax - bmin + 1))
    s3 = np.arange(r3[0], r3[1] + 1)[:, None]
    s4 = np.arange(r4[0], r4[1] + 1)[None, :]
    np.add.at(lat, ((s3 + s4) - amin, (s3 - s4) - bmin), np.outer(p3, p4))
    full = signal.convolve(np.outer(p1, p2), lat, method="direct")
    m0 = n1 + r1[0] + amin
    k0 = n2 + r2[0] + bmin
    out = np.zeros((len(m_values), len(n_values)))
    mi = np.asarray(m_values) - m0
    ni = np.asarray(n_values) - k0
    okm = (mi >= 0) & (mi < full.shape[0])
    okn = (ni >= 0) & (ni < full.shape[1])
    out[np.ix_(okm, okn)] = full[np.ix_(mi[okm], ni[okn])]
    return out


def covariance(spec: InteractingSkellamSpec, s: float, t: float) -> float:
    """``Cov(N1(s), N2(t))`` for ``s <= t``; depends on ``s`` only."""
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    x = spec
    return ((x.lambda1 * x.lambda2).cumulative(s) + (x.mu1 * x.mu2).cumulative(s)
            - (x.lambda1 * x.mu2).cumulative(s) - (x.mu1 * x.lambda2).cumulative(s)
            - x.eta12.cumulative(s) - x.eta21.cumulative(s))


def event_rate(spec: InteractingSkellamSpec) -> RateFunction:
    """Rate of the Poisson process counting state changes."""
    def build():
        total = ratefn.zero()
        for _, r in event_menu(spec):
            total = total + r
        return total

    return _memo(spec, "event_rate", build)


# -- simulation -------------------------------------------------------------


def _direct_events(spec, horizon, size, rng):
    menu = event_menu(spec)
    rates = [r for _, r in menu]
    rid, tt = thin(event_rate(spec), horizon, size, rng)
    if len(tt) == 0:
        return rid, tt, np.zeros(0, dtype=np.int64)
    if all(r.is_constant for r in rates):
        w = np.array([r.constant_value() for r in rates])
        types = rng.choice(len(rates), size=len(tt), p=w / w.sum())
    else:
        w = np.stack([r.value(tt) for r in rates], axis=1)
        cw = np.cumsum(w, axis=1)
        pick = rng.uniform(0.0, 1.0, size=len(tt)) * cw[:, -1]
        types = np.minimum((cw < pick[:, None]).sum(axis=1), len(rates) - 1)
    return rid, tt, types


def _decomposition_events(spec, horizon, size, rng):
    # eight independent Poisson streams, two per Skellam part
    dec = decompose(spec)
    streams = []
    for part, up_type, down_type in ((dec.s1, 4, 6), (dec.s2, 5, 7), (dec.s3, 0, 1), (dec.s4, 2, 3)):
        streams.append((part.rate_up, up_type))
        streams.append((part.rate_down, down_type))
    rids, tts, types = [], [], []
    for rate, ty in streams:
        rid, tt = thin(rate, horizon, size, rng)
        rids.append(rid)
        tts.append(tt)
        types.append(np.full(len(tt), ty))
    rid, tt, ty = np.concatenate(rids), np.concatenate(tts), np.concatenate(types)
    order = np.lexsort((tt, rid))
    return rid[order], tt[order], ty[order]


def sample_path(spec: InteractingSkellamSpec, horizon: float, rng: np.random.Generator,
                method: str = "direct") -> SamplePath:
    """One path on ``[0, horizon]``.

    ``direct`` thins a single stream at the total event rate and picks the
    jump type in proportion to the instantaneous type rates;
    ``decomposition`` superposes the four independent Skellam parts.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    _, tt, ty = _events(spec, horizon, 1, rng, method)
    jumps = np.array(JUMP_TYPES, dtype=np.int64)[ty].reshape(len(ty), 2)
    return SamplePath(tt, jumps, tuple(spec.initial), horizon)


def _events(spec, horizon, size, rng, method):
    if method == "direct":
        return _direct_events(spec, horizon, size, rng)
    if method == "decomposition":
        return _decomposition_events(spec, horizon, size, rng)
    raise ValueError(f"unknown method {method!r}")


def sample_endpoints(spec: InteractingSkellamSpec, horizon: float, size: int,
                     rng: np.random.Generator, method: str = "direct") -> np.ndarray:
    """Endpoints of ``size`` independent paths, shape ``(size, 2)``."""
    rid, _, ty = _events(spec, horizon, size, rng, method)
    jumps = np.array(JUMP_TYPES, dtype=np.int64)
    out = np.tile(np.asarray(spec.initial, dtype=np.int64), (size, 1))
    if len(ty):
        for d in range(2):
            out[:, d] += np.bincount(rid, weights=jumps[ty, d], minlength=size).astype(np.int64)
    return out


def sample_endpoints_at(spec: InteractingSkellamSpec, horizons: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """Endpoints at per-replicate horizons for a homogeneous spec (compound Poisson)."""
    lam, law = compound_representation(spec)
    horizons = np.asarray(horizons, dtype=float)
    out = np.tile(np.asarray(spec.initial, dtype=np.int64), (len(horizons), 1))
    if lam == 0:
        return out
    counts = rng.poisson(lam * horizons)
    probs = np.array([p for _, p in law])
    per_type = rng.multinomial(counts, probs)
    return out + per_type @ np.array([j for j, _ in law], dtype=np.int64)


def compound_representation(spec: InteractingSkellamSpec):
    """``(lambda_bar, [(jump, probability), ...])`` for a homogeneous spec."""
    if not spec.is_homogeneous:
        raise ValueError("compound Poisson representation needs constant rates")
    menu = [(j, r.constant_value()) for j, r in event_menu(spec)]
    lam = sum(w for _, w in menu)
    if lam == 0:
        return 0.0, [(j, 0.0) for j, _ in menu]
    return lam, [(j, w / lam) for j, w in menu]


def linear_combination(spec: InteractingSkellamSpec, a: int, b: int) -> GeneralizedSkellamSpec:
    """Law of ``a N1 + b N2`` as a generalized Skellam process."""
    if a == 0 and b == 0:
        raise ValueError("(a, b) must not both be zero")
    rates: dict[int, RateFunction] = {}
    for (i, j), r in event_menu(spec):
        jump = a * i + b * j
        if jump == 0 or r.is_zero:
            continue
        rates[jump] = rates[jump] + r if jump in rates else r
    n1, n2 = spec.initial
    if not rates:
        rates = {1: ratefn.zero()}
    return GeneralizedSkellamSpec(rates, a * n1 + b * n2)


# -- generalized bidimensional model ----------------------------------------


@dataclass(frozen=True)
class PoissonTerm:
    jump: int
    rate: RateFunction
    label: str


@dataclass(frozen=True)
class GeneralizedInteractSpec:
    """Groups change by sizes in ``I1``/``I2`` and forward ``N1``/``N2`` units."""

    lambda1: Mapping[int, RateFunction]
    lambda2: Mapping[int, RateFunction]
    eta12: Mapping[int, RateFunction]
    eta21: Mapping[int, RateFunction]
    delta1: RateFunction
    delta2: RateFunction
    initial: tuple = (0, 0)

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            if 0 in getattr(self, name):
                raise ValueError(f"{name}: jump sizes must be non-zero")
        for name in ("eta12", "eta21"):
            if any(k <= 0 for k in getattr(self, name)):
                raise ValueError(f"{name}: migration sizes must be positive integers")
        for name in ("lambda1", "lambda2", "eta12", "eta21"):
            if any(r.is_zero for r in getattr(self, name).values()):
                raise ValueError(f"{name}: listed rates must be strictly positive")

    @classmethod
    def from_interacting(cls, spec: InteractingSkellamSpec) -> "GeneralizedInteractSpec":
        """Unit-jump special case equivalent to an :class:`InteractingSkellamSpec`."""
        def keep(d):
            return {k: r for k, r in d.items() if not r.is_zero}

        return cls(keep({1: spec.lambda1, -1: spec.mu1}), keep({1: spec.lambda2, -1: spec.mu2}),
                   keep({1: spec.eta12}), keep({1: spec.eta21}), spec.delta1, spec.delta2,
                   tuple(spec.initial))


def generalized_marginals(spec: GeneralizedInteractSpec) -> tuple[list[PoissonTerm], list[PoissonTerm]]:
    """Independent Poisson terms making up each marginal.

    Shared streams (joint changes and migrations) appear in both lists with
    the same label, which is what couples the two marginals.
    """
    first, second = [], []
    for h, r in sorted(spec.lambda1.items()):
        first.append(PoissonTerm(h, r * spec.delta2, f"N1[{h}]"))
    for k, r in sorted(spec.lambda2.items()):
        second.append(PoissonTerm(k, spec.delta1 * r, f"N2[{k}]"))
    for (h, r1), (k, r2) in itertools.product(sorted(spec.lambda1.items()), sorted(spec.lambda2.items())):
        rate = r1 * r2
        first.append(PoissonTerm(h, rate, f"N[{h},{k}]"))
        second.append(PoissonTerm(k, rate, f"N[{h},{k}]"))
    for h, r in sorted(spec.eta12.items()):
        first.append(PoissonTerm(-h, r, f"M12[{h}]"))
        second.append(PoissonTerm(h, r, f"M12[{h}]"))
    for k, r in sorted(spec.eta21.items()):
        first.append(PoissonTerm(k, r, f"M21[{k}]"))
        second.append(PoissonTerm(-k, r, f"M21[{k}]"))
    return first, second


def terms_as_skellam(terms: Sequence[PoissonTerm], initial: int = 0) -> GeneralizedSkellamSpec:
    """Merge Poisson terms with equal jump size into one generalized Skellam spec."""
    rates: dict[int, RateFunction] = {}
    for term in terms:
        rates[term.jump] = rates[term.jump] + term.rate if term.jump in rates else term.rate
    return GeneralizedSkellamSpec(rates, initial)


def order_k_grouping(spec: GeneralizedInteractSpec) -> dict[str, list[PoissonTerm]]:
    """Regroup the first marginal's terms into the order-K Skellam blocks.

    Keys: ``"S1K"`` (own changes), ``"cross"`` (the ``h N[h,k]`` streams) and
    ``"SN"`` (migrations).
    """
    first, _ = generalized_marginals(spec)
    groups: dict[str, list[PoissonTerm]] = {"S1K": [], "cross": [], "SN": []}
    for term in first:
        key = {"N1": "S1K", "N[": "cross", "M1": "SN", "M2": "SN"}[term.label[:2]]
        groups[key].append(term)
    return groups


# -- three groups -----------------------------------------------------------


@dataclass(frozen=True)
class TrivariateSpec:
    """Three groups; ``eta[(g, h)]`` moves one unit from group ``g`` to ``h`` (1-based)."""

    lam: tuple
    mu: tuple
    delta: tuple
    eta: Mapping[tuple, RateFunction] = field(default_factory=dict)
    initial: tuple = (0, 0, 0)

    def __post_init__(self):
        if not (len(self.lam) == len(self.mu) == len(self.delta) == len(self.initial) == 3):
            raise ValueError("trivariate spec needs three groups")
        for key in self.eta:
            g, h = key
            if g == h or not {g, h} <= {1, 2, 3}:
                raise ValueError(f"invalid migration pair {key}")

    def eta_rate(self, g: int, h: int) -> RateFunction:
        return self.eta.get((g, h), ratefn.zero())

    def group_rate(self, g: int, sign: int) -> RateFunction:
        return {1: self.lam, -1: self.mu, 0: self.delta}[sign][g - 1]


@dataclass(frozen=True)
class TrivariateDecomposition:
    patterns: tuple  # sign vectors, first non-zero entry positive
    components: tuple  # NhSkellamSpec per pattern
    incidence: np.ndarray  # shape (3, 13): N_g = sum_c incidence[g, c] S_c


def _pattern_rate(spec: TrivariateSpec, s: tuple) -> RateFunction:
    """Rate of the joint change ``s``: one event per group per instant."""
    rate = ratefn.zero()
    if any(s):
        prod = spec.group_rate(1, s[0])
        for g in (2, 3):
            prod = prod * spec.group_rate(g, s[g - 1])
        rate = rate + prod
    for g, h in itertools.permutations((1, 2, 3), 2):
        if s[g - 1] == -1 and s[h - 1] == 1:
            f = 6 - g - h
            rate = rate + spec.eta_rate(g, h) * spec.group_rate(f, s[f - 1])
    return rate


def _patterns() -> list[tuple]:
    singles = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    pairs = [(1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1)]
    triples = [(1, 1, 1), (1, -1, 1), (1, 1, -1), (1, -1, -1)]
    return singles + pairs + triples


def trivariate_decompose(spec: TrivariateSpec) -> TrivariateDecomposition:
    """The ``(3^3 - 1)/2 = 13`` independent Skellam parts and their incidence."""
    pats = _patterns()
    comps = []
    for s in pats:
        neg = tuple(-x for x in s)
        init = spec.initial[s.index(1)] if sum(map(abs, s)) == 1 else 0
        comps.append(NhSkellamSpec(_pattern_rate(spec, s), _pattern_rate(spec, neg), init))
    inc = np.array(pats, dtype=np.int64).T
    return TrivariateDecomposition(tuple(pats), tuple(comps), inc)


def trivariate_event_menu(spec: TrivariateSpec) -> list[tuple[tuple[int, int, int], RateFunction]]:
    """Elementary events (before grouping by jump vector) with their rates.

    Each group independently grows, shrinks or stays (at least one changes),
    or one ordered pair migrates while the third group does its own thing.
    """
    menu = []
    for s in itertools.product((1, -1, 0), repeat=3):
        if not any(s):
            continue
        r = spec.group_rate(1, s[0]) * spec.group_rate(2, s[1]) * spec.group_rate(3, s[2])
        menu.append((s, r))
    for g, h in itertools.permutations((1, 2, 3), 2):
        f = 6 - g - h
        for sf in (1, -1, 0):
            jump = [0, 0, 0]
            jump[g - 1] -= 1
            jump[h - 1] += 1
            jump[f - 1] = sf
            menu.append((tuple(jump), spec.eta_rate(g, h) * spec.group_rate(f, sf)))
    return menu


def sample_trivariate_endpoints(spec: TrivariateSpec, horizon: float, size: int,
                                rng: np.random.Generator, method: str = "direct") -> np.ndarray:
    """Endpoints at ``horizon``; ``direct`` runs the elementary event menu."""
    out = np.tile(np.asarray(spec.initial, dtype=np.int64), (size, 1))
    if method == "direct":
        streams = trivariate_event_menu(spec)
    elif method == "decomposition":
        dec = trivariate_decompose(spec)
        streams = []
        for s, comp in zip(dec.patterns, dec.components):
            streams.append((s, comp.rate_up))
            streams.append((tuple(-x for x in s), comp.rate_down))
    else:
        raise ValueError(f"unknown method {method!r}")
    for jump, rate in streams:
        if rate.is_zero:
            continue
        rid, _ = thin(rate, horizon, size, rng)
        counts = np.bincount(rid, minlength=size)
        out += counts[:, None] * np.asarray(jump, dtype=np.int64)[None, :]
    return out
