"""Goodness-of-fit helpers for simulation-versus-law checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class GofResult:
    statistic: float
    dof: int
    pvalue: float


def _pool(expected: np.ndarray, observed: np.ndarray):
    """Merge adjacent bins (in the given order) until each expects >= MIN_EXPECTED."""
    e_out, o_out = [], []
    e_acc = o_acc = 0.0
    for e, o in zip(expected, observed):
        e_acc += e
        o_acc += o
        if e_acc >= MIN_EXPECTED:
            e_out.append(e_acc)
            o_out.append(o_acc)
            e_acc = o_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if e_out:
            e_out[-1] += e_acc
            o_out[-1] += o_acc
        else:
            e_out.append(e_acc)
            o_out.append(o_acc)
    return np.array(e_out), np.array(o_out)


def chisquare_gof(samples, support, probs) -> GofResult:
    """Chi-square test of integer (or tuple) ``samples`` against a pmf.

    ``support`` lists the states with probabilities ``probs``; any sample
    outside the support, together with the missing mass ``1 - sum(probs)``,
    forms an extra tail bin.
    """
    samples = np.asarray(samples)
    support = np.asarray(support)
    probs = np.asarray(probs, dtype=float)
    n = len(samples)
    if samples.ndim == 1:
        keys = samples
        sup_keys = support
    else:
        keys = [tuple(r) for r in samples]
        sup_keys = [tuple(r) for r in support]
    index = {k.item() if hasattr(k, "item") else k: i for i, k in enumerate(sup_keys)}
    counts = np.zeros(len(probs) + 1)
    for k in keys:
        kk = k.item() if hasattr(k, "item") else k
        counts[index.get(kk, len(probs))] += 1
    expected = np.append(probs, max(0.0, 1.0 - probs.sum())) * n
    order = np.argsort(-expected, kind="stable")
    e, o = _pool(expected[order][::-1], counts[order][::-1])
    stat = float(np.sum((o - e) ** 2 / e))
    dof = max(len(e) - 1, 1)
    return GofResult(stat, dof, float(stats.chi2.sf(stat, dof)))


def chisquare_two_sample(a, b) -> GofResult:
    """Two-sample chi-square homogeneity test for discrete samples."""
    a = [tuple(np.atleast_1d(r)) for r in np.asarray(a)]
    b = [tuple(np.atleast_1d(r)) for r in np.asarray(b)]
    keys = sorted(set(a) | set(b))
    idx = {k: i for i, k in enumerate(keys)}
    ca = np.zeros(len(keys))
    cb = np.zeros(len(keys))
    for k in a:
        ca[idx[k]] += 1
    for k in b:
        cb[idx[k]] += 1
    tot = ca + cb
    order = np.argsort(-tot, kind="stable")
    ca, cb = ca[order], cb[order]
    # pool rare categories so every expected cell count is >= MIN_EXPECTED
    frac = min(len(a), len(b)) / (len(a) + len(b))
    rows_a, rows_b = [], []
    acc_a = acc_b = 0.0
    for x, y in zip(ca, cb):
        acc_a += x
        acc_b += y
        if (acc_a + acc_b) * frac >= MIN_EXPECTED:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if rows_a:
            rows_a[-1] += acc_a
            rows_b[-1] += acc_b
        else:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
    if len(rows_a) < 2:
        return GofResult(0.0, 1, 1.0)
    stat, p, dof, _ = stats.chi2_contingency(np.array([rows_a, rows_b]), correction=False)
    return GofResult(float(stat), int(dof), float(p))


def within_standard_errors(samples, target: float, k: float = 3.0) -> tuple[bool, float, float]:
    """Whether the sample mean lies within ``k`` standard errors of ``target``."""
    x = np.asarray(samples, dtype=float)
    mean = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(len(x)))
    return abs(mean - target) <= k * se, mean, se


def dkw_epsilon(n: int, level: float) -> float:
    """Dvoretzky-Kiefer-Wolfowitz half-width for a confidence band at ``level``."""
    return math.sqrt(math.log(2.0 / level) / (2.0 * n))
