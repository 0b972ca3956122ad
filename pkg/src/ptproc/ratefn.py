"""Deterministic time-dependent rate functions.

Every rate is stored internally as a right-continuous piecewise polynomial
on ``[0, inf)``.  The three user-facing kinds (constant, piecewise-constant,
tabulated with linear interpolation) are degree 0 or 1; products and sums of
rates stay piecewise polynomial, so cumulative integrals and suprema remain
exact for every rate the process specs build.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

__all__ = ["RateFunction", "constant", "piecewise", "tabulated", "zero"]

_KINDS = ("constant", "piecewise", "tabulated", "derived")


def _shift(coef: np.ndarray, d: float) -> np.ndarray:
    """Coefficients of ``p(s + d)`` given ascending coefficients of ``p(s)``."""
    if d == 0 or len(coef) == 1:
        return np.array(coef, dtype=float)
    out = Polynomial(coef)(Polynomial([d, 1.0])).coef
    return np.pad(out, (0, len(coef) - len(out)))


@dataclass(frozen=True, eq=False)
class RateFunction:
    """Non-negative rate function with exact cumulative integral.

    Use the module-level constructors :func:`constant`, :func:`piecewise` and
    :func:`tabulated`.  ``breaks[i]`` starts piece ``i``; the last piece
    extends to infinity.  ``coefs[i]`` are ascending coefficients in the
    local variable ``t - breaks[i]``.
    """

    kind: str
    breaks: np.ndarray
    coefs: tuple
    params: dict = field(default_factory=dict)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}")
        breaks = np.asarray(self.breaks, dtype=float)
        if breaks[0] != 0.0 or np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        object.__setattr__(self, "breaks", breaks)
        cum = np.zeros(len(breaks))
        for i in range(len(breaks) - 1):
            anti = P.polyint(self.coefs[i])
            cum[i + 1] = cum[i] + P.polyval(breaks[i + 1] - breaks[i], anti)
        object.__setattr__(self, "_cum", cum)

    # -- evaluation -------------------------------------------------------

    def _piece(self, t):
        return np.searchsorted(self.breaks, t, side="right") - 1

    def value(self, t):
        """Rate at time ``t`` (right-continuous at breakpoints)."""
        ta = np.asarray(t, dtype=float)
        if np.any(ta < 0):
            raise ValueError("rate functions are defined for t >= 0 only")
        if len(self.breaks) == 1 and len(self.coefs[0]) == 1:
            out = np.full(ta.shape, float(self.coefs[0][0]))
        else:
            idx = self._piece(ta)
            out = np.empty(ta.shape)
            for i in np.unique(idx):
                m = idx == i
                out[m] = P.polyval(ta[m] - self.breaks[i], self.coefs[i])
        out = np.maximum(out, 0.0)
        return float(out) if out.ndim == 0 else out

    def cumulative(self, t):
        """Exact integral of the rate over ``[0, t]``."""
        ta = np.asarray(t, dtype=float)
        if np.any(ta < 0):
            raise ValueError("rate functions are defined for t >= 0 only")
        idx = self._piece(ta)
        out = np.empty(ta.shape)
        for i in np.unique(idx):
            m = idx == i
            anti = P.polyint(self.coefs[i])
            out[m] = self._cum[i] + P.polyval(ta[m] - self.breaks[i], anti)
        return float(out) if out.ndim == 0 else out

    def integral(self, t0: float, t1: float) -> float:
        return self.cumulative(t1) - self.cumulative(t0)

    def sup_on(self, t0: float, t1: float) -> float:
        """Exact supremum of the rate over the closed interval ``[t0, t1]``."""
        if not 0 <= t0 < t1:
            raise ValueError(f"need 0 <= t0 < t1, got [{t0}, {t1}]")
        i0, i1 = self._piece(t0), self._piece(t1)
        best = 0.0
        for i in range(i0, i1 + 1):
            lo = max(t0, self.breaks[i]) - self.breaks[i]
            hi_abs = self.breaks[i + 1] if i + 1 < len(self.breaks) else np.inf
            hi = min(t1, hi_abs) - self.breaks[i]
            c = self.coefs[i]
            cand = [lo, hi]
            if len(c) > 2:
                for r in P.polyroots(P.polyder(c)):
                    if abs(r.imag) < 1e-12 and lo < r.real < hi:
                        cand.append(r.real)
            best = max(best, *(P.polyval(x, c) for x in cand))
        return max(best, 0.0)

    def majorant_intervals(self, horizon: float):
        """Split ``[0, horizon]`` at breakpoints and pair each piece with its sup."""
        edges = np.concatenate([self.breaks[self.breaks < horizon], [horizon]])
        return [(a, b, self.sup_on(a, b)) for a, b in zip(edges[:-1], edges[1:])]

    # -- structure --------------------------------------------------------

    @property
    def is_constant(self) -> bool:
        vals = [c for c in self.coefs]
        if any(np.any(np.asarray(c[1:]) != 0) for c in vals):
            return False
        return all(c[0] == vals[0][0] for c in vals)

    @property
    def is_zero(self) -> bool:
        return all(np.all(np.asarray(c) == 0) for c in self.coefs)

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("rate function is not constant")
        return float(self.coefs[0][0])

    def _refine(self, breaks: np.ndarray) -> list:
        """Coefficients of this function re-expanded on a finer break grid."""
        out = []
        for b in breaks:
            i = self._piece(b)
            out.append(_shift(np.asarray(self.coefs[i], dtype=float), b - self.breaks[i]))
        return out

    def _combine(self, other: "RateFunction", op) -> "RateFunction":
        breaks = np.union1d(self.breaks, other.breaks)
        a, b = self._refine(breaks), other._refine(breaks)
        coefs = []
        for x, y in zip(a, b):
            c = np.trim_zeros(np.atleast_1d(op(x, y)), "b")
            coefs.append(c if len(c) else np.zeros(1))
        coefs = tuple(coefs)
        return _simplify(breaks, coefs)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = constant(float(other))
        return self._combine(other, P.polyadd)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            other = constant(float(other))
        return self._combine(other, P.polymul)

    __rmul__ = __mul__

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "derived":
            raise TypeError("derived rate functions are not serializable")
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "RateFunction":
        kind = d.get("kind")
        if kind == "constant":
            return constant(d["c"])
        if kind == "piecewise":
            return piecewise(d["breakpoints"], d["values"])
        if kind == "tabulated":
            return tabulated(d["grid"], d["values"])
        raise ValueError(f"unknown rate kind {kind!r}")

    def __repr__(self):
        if self.kind == "derived":
            return f"RateFunction(derived, {len(self.breaks)} pieces)"
        return f"RateFunction({self.kind}, {self.params})"


def _simplify(breaks, coefs) -> RateFunction:
    # merge adjacent pieces that are the same constant
    keep_b, keep_c = [breaks[0]], [coefs[0]]
    for b, c in zip(breaks[1:], coefs[1:]):
        prev = keep_c[-1]
        if len(c) == 1 and len(prev) == 1 and c[0] == prev[0]:
            continue
        keep_b.append(b)
        keep_c.append(c)
    return RateFunction("derived", np.array(keep_b), tuple(keep_c))


def constant(c: float) -> RateFunction:
    c = float(c)
    if not np.isfinite(c) or c < 0:
        raise ValueError(f"rate must be finite and >= 0, got {c}")
    return RateFunction("constant", np.array([0.0]), (np.array([c]),), {"c": c})


def zero() -> RateFunction:
    return constant(0.0)


def piecewise(breakpoints: Sequence[float], values: Sequence[float]) -> RateFunction:
    """Right-continuous step function; ``values[i]`` holds on ``[b_i, b_{i+1})``."""
    b = np.asarray(breakpoints, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(b) != len(v) or len(b) == 0:
        raise ValueError("breakpoints and values must have equal non-zero length")
    if b[0] != 0:
        raise ValueError("first breakpoint must be 0")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("piecewise values must be finite and >= 0")
    params = {"breakpoints": b.tolist(), "values": v.tolist()}
    return RateFunction("piecewise", b, tuple(np.array([x]) for x in v), params)


def tabulated(grid: Sequence[float], values: Sequence[float]) -> RateFunction:
    """Linear interpolation on ``grid``, clamped to the end values outside it."""
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(g) != len(v) or len(g) < 1:
        raise ValueError("grid and values must have equal non-zero length")
    if g[0] < 0 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be non-negative and strictly increasing")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("tabulated values must be finite and >= 0")
    breaks, coefs = [], []
    if g[0] > 0:
        breaks.append(0.0)
        coefs.append(np.array([v[0]]))
    for i in range(len(g) - 1):
        slope = (v[i + 1] - v[i]) / (g[i + 1] - g[i])
        breaks.append(g[i])
        coefs.append(np.array([v[i], slope]) if slope != 0 else np.array([v[i]]))
    breaks.append(g[-1])
    coefs.append(np.array([v[-1]]))
    params = {"grid": g.tolist(), "values": v.tolist()}
    return RateFunction("tabulated", np.array(breaks), tuple(coefs), params)
