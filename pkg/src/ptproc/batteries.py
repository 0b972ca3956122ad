"""Built-in validation batteries.

Each battery compares an analytic engine with an independent reference
(an oracle, an ODE integrator, exact rational arithmetic or a seeded Monte
Carlo campaign) and reports one :class:`Check` per comparison.  The same
batteries back the ``validate`` command of the CLI and the acceptance
tests.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import bdm, interact, oracle, ratefn, skellam, stats, timechange
from .rng import run_blocks
from .specfun import alternating_binomial_sum, harmonic_number, mittag_leffler

DEFAULT_SEED = 20240611


@dataclass
class Check:
    """One comparison.  ``kind`` says how ``value`` relates to ``threshold``.

    ``"max"``: pass when ``value <= threshold`` (an error or distance);
    ``"min"``: pass when ``value > threshold`` (a p-value);
    ``"exact"``: pass when ``value == 0`` (exact-arithmetic mismatch count).
    """

    name: str
    value: float
    threshold: float
    kind: str = "max"

    @property
    def passed(self) -> bool:
        if self.kind == "max":
            return bool(self.value <= self.threshold)
        if self.kind == "min":
            return bool(self.value > self.threshold)
        return self.value == 0


@dataclass
class BatteryResult:
    name: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0
    time_limit: float = math.inf

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and self.seconds < self.time_limit

    def worst(self) -> Check:
        failing = [c for c in self.checks if not c.passed]
        return failing[0] if failing else self.checks[0]

    def summary(self) -> str:
        bad = [c for c in self.checks if not c.passed]
        status = "PASS" if self.passed else "FAIL"
        detail = f"{len(self.checks)} checks"
        if bad:
            c = bad[0]
            detail += f"; first failure {c.name}: {c.value:.3e} vs {c.threshold:.3e}"
        return f"{status} {self.name} ({detail}; {self.seconds:.1f}s / limit {self.time_limit:.0f}s)"


def _const_interacting(rng: np.random.Generator, initial=(0, 0)) -> interact.InteractingSkellamSpec:
    vals = rng.uniform(0.1, 1.2, size=8)
    return interact.InteractingSkellamSpec.constant(*vals, initial=initial)


# -- 1 ----------------------------------------------------------------------


def skellam_decomposition(seed: int = DEFAULT_SEED, **_) -> list[Check]:
    rng = np.random.default_rng([seed, 1])
    checks = []
    for i in range(5):
        spec = _const_interacting(rng, initial=tuple(int(x) for x in rng.integers(0, 4, size=2)))
        dec = interact.decompose(spec)
        worst = 0.0
        # u, v in [0.4, 1] keep |G| below a few dozen, where an absolute 1e-12 bound is
        # a statement about the identity rather than about floating-point rounding
        for _ in range(20):
            t = rng.uniform(0.05, 2.0)
            u, v = rng.uniform(0.4, 1.0, size=2)
            lhs = interact.joint_pgf(spec, t, u, v)
            rhs = (skellam.skellam_pgf(dec.s1, t, u) * skellam.skellam_pgf(dec.s2, t, v)
                   * skellam.skellam_pgf(dec.s3, t, u * v) * skellam.skellam_pgf(dec.s4, t, u / v))
            worst = max(worst, abs(lhs - rhs))
        checks.append(Check(f"spec{i}: |pgf - product|", worst, 1e-12))
    return checks


# -- 2 ----------------------------------------------------------------------


def dual_engine_specs():
    pw = ratefn.piecewise([0.0, 1.0], [0.4, 0.9])
    c = ratefn.constant
    return [
        interact.InteractingSkellamSpec.constant(1, 1, 1, 1, 1, 1, 0, 0, initial=(0, 0)),
        interact.InteractingSkellamSpec.constant(0.5, 0.4, 0.3, 0.6, 0.2, 0.3, 0.1, 0.15, initial=(2, -1)),
        interact.InteractingSkellamSpec(pw, c(0.7), c(0.5), pw, c(0.3), c(0.6), c(0.4), c(0.2), (0, 1)),
    ]


def joint_pmf_dual_engine(seed: int = DEFAULT_SEED, **_) -> list[Check]:
    checks = []
    for i, (spec, t) in enumerate(zip(dual_engine_specs(), (0.5, 2.0, 1.5))):
        n1, n2 = spec.initial
        menu = [(j, r.cumulative(t)) for j, r in interact.event_menu(spec)]
        ref = oracle.poisson_convolution_pmf(menu, ((n1 - 20, n1 + 20), (n2 - 20, n2 + 20)), spec.initial)
        eng = np.array([[interact.joint_pmf(spec, t, m, n) for n in range(n2 - 20, n2 + 21)]
                        for m in range(n1 - 20, n1 + 21)])
        checks.append(Check(f"spec{i}: max |joint_pmf - convolution| on 41x41", float(np.abs(eng - ref).max()), 1e-8))
    return checks


# -- 3 ----------------------------------------------------------------------


def sampler_spec():
    c = ratefn.constant
    lam1 = ratefn.tabulated([0.0, 1.0, 2.0], [0.3, 1.0, 0.6])
    return interact.InteractingSkellamSpec(lam1, c(0.6), c(0.5), c(0.4), c(0.5), c(0.3), c(0.3), c(0.2), (1, 0))


def _window_table(spec, t, pad=0):
    n1, n2 = spec.initial
    ms = np.arange(n1 - 25, n1 + 26)
    ns = np.arange(n2 - 25, n2 + 26)
    tab = interact.joint_pmf_table(spec, t, ms, ns)
    support = np.array([(m, n) for m in ms for n in ns])
    return support, tab.ravel()


def sampler_vs_law(seed: int = DEFAULT_SEED, replicates: int = 100_000, **_) -> list[Check]:
    spec = sampler_spec()
    t = 2.0
    direct = run_blocks(lambda g, k: interact.sample_endpoints(spec, t, k, g, "direct"), replicates, seed)
    decomp = run_blocks(lambda g, k: interact.sample_endpoints(spec, t, k, g, "decomposition"),
                        replicates, seed + 1)
    support, probs = _window_table(spec, t)
    return [
        Check("two-sample chi-square p (direct vs decomposition)",
              stats.chisquare_two_sample(direct, decomp).pvalue, 1e-3, "min"),
        Check("GOF p (direct vs joint_pmf)", stats.chisquare_gof(direct, support, probs).pvalue, 1e-3, "min"),
        Check("GOF p (decomposition vs joint_pmf)", stats.chisquare_gof(decomp, support, probs).pvalue, 1e-3, "min"),
    ]


# -- 4 ----------------------------------------------------------------------


def covariance_specs():
    return {
        "migration-heavy": interact.InteractingSkellamSpec.constant(0.6, 0.5, 0.4, 0.5, 0.5, 0.5, 1.5, 1.2),
        "migration-free": interact.InteractingSkellamSpec.constant(1.2, 1.0, 0.3, 0.2, 0.6, 0.4, 0.0, 0.0),
    }


def covariance_mc(seed: int = DEFAULT_SEED, replicates: int = 1_000_000, **_) -> list[Check]:
    checks = []
    for i, (label, spec) in enumerate(covariance_specs().items()):
        ends = run_blocks(lambda g, k: interact.sample_endpoints(spec, 1.0, k, g), replicates, seed + 10 * i)
        x = ends.astype(float)
        prod = (x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())
        target = interact.covariance(spec, 1.0, 1.0)
        ok, mean, se = stats.within_standard_errors(prod * len(x) / (len(x) - 1), target)
        checks.append(Check(f"{label}: |MC cov - closed form| / SE", abs(mean - target) / se, 3.0))
    return checks


# -- 5, 6 -------------------------------------------------------------------


def mean_vector_specs():
    return [
        bdm.BdmSpec(2.0, 0.0, 1.0, 0.0, 0.0, 0.0, (1, 0)),  # reduces to n1 e^{(lambda1-mu1) t}
        bdm.BdmSpec(1.0, 2.0, 1.0, 1.0, 0.5, 0.7, (3, 2)),
        bdm.BdmSpec(0.0, 0.0, 1.0, 2.0, 0.5, 0.25, (3, 2)),
        bdm.BdmSpec(0.5, 0.5, 0.2, 0.9, 3.0, 0.1, (0, 4)),  # migration dominant
        bdm.BdmSpec(0.1, 0.2, 2.5, 1.5, 0.1, 0.2, (6, 1)),  # death dominant
        bdm.BdmSpec(1.0, 1.0, 0.5, 0.5, 0.0, 0.0, (2, 5)),  # R = 0 branch
    ]


TIME_GRID = tuple(round(0.1 * k, 10) for k in range(1, 21))


def mean_vector_check(**_) -> list[Check]:
    checks = []
    for i, spec in enumerate(mean_vector_specs()):
        worst = 0.0
        for t in TIME_GRID:
            m = bdm.mean_vector(spec, t)
            o = bdm.moments_ode(spec, t)
            worst = max(worst, abs(m[0] - o.mean1), abs(m[1] - o.mean2))
            if spec.eta1 == spec.eta2 == 0:
                worst = max(worst, abs(m[0] - spec.initial[0] * math.exp((spec.lambda1 - spec.mu1) * t)))
        checks.append(Check(f"spec{i}: max |closed - ODE|", worst, 1e-8))
    return checks


def reduced_specs():
    # (lambda1, lambda2, mu chosen so lambda - mu = alpha, eta, n1, n2)
    out = []
    for alpha, eta, l1, l2, n1, n2 in [(0.5, 0.2, 1.0, 0.8, 3, 2), (0.3, 0.5, 1.2, 0.6, 4, 1),
                                       (-0.4, 0.3, 0.5, 0.9, 2, 6), (1.1, 0.05, 2.0, 1.5, 5, 5)]:
        out.append(bdm.BdmSpec(l1, l2, l1 - alpha, l2 - alpha, eta, eta, (n1, n2)))
    return out


def reduced_second_moments(**_) -> list[Check]:
    checks = []
    for i, spec in enumerate(reduced_specs()):
        worst = 0.0
        for t in TIME_GRID:
            s = bdm.second_moments_reduced(spec, t)
            o = bdm.moments_ode(spec, t)
            worst = max(worst, abs(s[0] - o.sigma), abs(s[1] - o.sigma1), abs(s[2] - o.sigma2))
        checks.append(Check(f"spec{i}: max |closed - ODE| for sigma, sigma1, sigma2", worst, 1e-8))
    return checks


# -- 7 ----------------------------------------------------------------------


DEATH_MIGRATION_RATES = ((1.0, 2.0, 0.5, 0.25), (0.7, 0.7, 1.3, 0.4), (0.2, 1.5, 2.0, 3.0))


def death_migration_multinomial(**_) -> list[Check]:
    checks = []
    for initial in ((3, 2), (5, 5)):
        for r, (mu1, mu2, e1, e2) in enumerate(DEATH_MIGRATION_RATES):
            spec = bdm.BdmSpec(0.0, 0.0, mu1, mu2, e1, e2, initial)
            gen = oracle.build_death_migration_generator(spec)
            t = 0.7
            ref = oracle.transient_pmf(gen, initial, t)
            table = bdm.death_migration_table(spec, t)
            eng = np.array([table[s] for s in gen.states])
            st = np.array(gen.states, dtype=float)
            cov_ref = (ref @ (st[:, 0] * st[:, 1])) - (ref @ st[:, 0]) * (ref @ st[:, 1])
            tag = f"{initial} rates{r}"
            checks.append(Check(f"{tag}: max |table - uniformization|", float(np.abs(eng - ref).max()), 1e-10))
            checks.append(Check(f"{tag}: extinction", abs(bdm.extinction_probability(spec, t)
                                                          - ref[gen.index[(0, 0)]]), 1e-10))
            checks.append(Check(f"{tag}: covariance", abs(bdm.covariance_death_migration(spec, t) - cov_ref), 1e-10))
    return checks


# -- 8 ----------------------------------------------------------------------


def extinction_time(seed: int = DEFAULT_SEED, replicates: int = 1_000_000, **_) -> list[Check]:
    spec = bdm.BdmSpec(0.0, 0.0, 2.0, 2.0, 1.0, 0.5, (3, 1))
    times = run_blocks(lambda g, k: bdm.sample_extinction_times(spec, k, g), replicates, seed)
    target = bdm.expected_extinction_time(spec)
    ok, mean, se = stats.within_standard_errors(times, target)
    mismatches = 0
    for n in range(1, 61):
        h = harmonic_number(n)
        if alternating_binomial_sum(n) != -h:
            mismatches += 1
        # the integral form before the last simplification
        squared = n * sum((Fraction((-1) ** k * math.comb(n - 1, k), (1 + k) ** 2) for k in range(n)), Fraction(0))
        if squared != h:
            mismatches += 1
    return [
        Check("|MC mean extinction time - H_n/mu| / SE", abs(mean - target) / se, 3.0),
        Check("rational identity mismatches for n <= 60", mismatches, 0, "exact"),
    ]


# -- 9 ----------------------------------------------------------------------


def first_passage_gf(**_) -> list[Check]:
    grid = np.linspace(-0.95, 0.95, 39)
    specs = [bdm.BdmSpec(0, 0, 1.0, 2.0, 0.5, 0.25, (3, 2)),
             bdm.BdmSpec(0, 0, 0.8, 0.8, 1.0, 1.0, (4, 4)),
             bdm.BdmSpec(0, 0, 0.3, 1.7, 2.5, 0.2, (1, 6))]
    checks = []
    for i, spec in enumerate(specs):
        worst = max(bdm.first_passage_gf_residual(spec, t, grid) for t in (0.2, 0.7, 2.0))
        checks.append(Check(f"spec{i}: GF residual", worst, 1e-10))
    return checks


# -- 10 ---------------------------------------------------------------------


def pure_migration(**_) -> list[Check]:
    checks = []
    for i, spec in enumerate([bdm.PureMigrationSpec(1.0, 2.0, 3, 1), bdm.PureMigrationSpec(0.4, 1.3, 5, 7)]):
        gen = oracle.build_pure_migration_generator(spec)
        n = spec.total
        worst = 0.0
        for t in (0.1, 0.5, 2.0):
            ref = oracle.transient_pmf(gen, (spec.n1,), t)
            worst = max(worst, float(np.abs(bdm.pure_migration_pmf(spec, t, np.arange(n + 1)) - ref).max()))
        checks.append(Check(f"spec{i}: max |pmf - uniformization|", worst, 1e-12))
        res = max(abs(bdm.pure_migration_master_residual(spec, t, k, 1e-5))
                  for t in (0.2, 0.5, 1.5) for k in range(n + 1))
        checks.append(Check(f"spec{i}: master-equation residual", res, 1e-6))
        stat = bdm.pure_migration_stationary(spec)
        far = bdm.pure_migration_pmf(spec, 60.0, np.arange(n + 1))
        err = max(float(np.abs(oracle.stationary_vector(gen) - stat).max()), float(np.abs(far - stat).max()),
                  float(np.abs(bdm.pure_migration_master_rhs(spec, stat)).max()))
        checks.append(Check(f"spec{i}: stationary law vs binomial", err, 1e-12))
    return checks


# -- 11 ---------------------------------------------------------------------


def bd_difference(**_) -> list[Check]:
    checks = []
    for i, rates in enumerate([(1.0, 2.0, 1.5, 0.5), (1.2, 0.7, 1.2, 0.7), (2.0, 1.0, 0.5, 1.0)]):
        worst = 0.0
        for t in (0.5, 1.0, 2.0):
            for k in range(-15, 16):
                worst = max(worst, abs(bdm.bd_difference_pmf(*rates, t, k)
                                       - oracle.bd_difference_convolution(*rates, t, k)))
        checks.append(Check(f"rates{i}: max |closed - convolution|", worst, 1e-10))
    return checks


# -- 12 ---------------------------------------------------------------------


def fractional_migration(seed: int = DEFAULT_SEED, replicates: int = 100_000, **_) -> list[Check]:
    checks = []
    # (a) alpha = 1 is the classical chain
    pm = bdm.PureMigrationSpec(1.0, 2.0, 3, 0)
    dm = bdm.BdmSpec(0.0, 0.0, 1.0, 2.0, 0.5, 0.25, (3, 2))
    worst = 0.0
    for gen, init in ((oracle.build_pure_migration_generator(pm), (3,)),
                      (oracle.build_death_migration_generator(dm), (3, 2))):
        for t in (0.3, 1.0):
            d = timechange.fractional_distribution(gen, 1.0, t, init)
            worst = max(worst, float(np.abs(d.pmf - oracle.transient_pmf(gen, init, t)).max()))
    one = timechange.BernsteinSpec.stable(1.0)
    worst = max(worst, abs(timechange.laplace_of_inverse(one, 1.3, 0.7) - math.exp(-0.91)),
                abs(timechange.renewal_waiting_survival(one, 2.0, 0.8) - math.exp(-1.6)))
    checks.append(Check("(a) alpha=1 vs classical", worst, 1e-10))
    # (b) Laplace transform of the inverse stable clock
    for j, alpha in enumerate((0.5, 0.7, 0.9)):
        spec = timechange.BernsteinSpec.stable(alpha)
        L = run_blocks(lambda g, k: timechange.sample_inverse(spec, 1.0, g, size=k), replicates, seed + 100 + j)
        z = 0.0
        for t, y in ((1.0, 0.5), (1.0, 2.0), (2.0, 1.0)):
            # L(t) = t^alpha L(1) in law
            vals = np.exp(-y * t**alpha * L)
            target = timechange.laplace_of_inverse(spec, t, y)
            z = max(z, abs(vals.mean() - target) / (vals.std(ddof=1) / math.sqrt(len(vals))))
        checks.append(Check(f"(b) alpha={alpha}: max |MC - E_alpha| / SE", z, 3.0))
    # (c) time-changed pure migration against the spectral law
    pm2 = bdm.PureMigrationSpec(1.0, 2.0, 2, 1)
    gen = oracle.build_pure_migration_generator(pm2)
    clock = timechange.BernsteinSpec.stable(0.6)
    ends = run_blocks(lambda g, k: timechange.time_changed_sample(pm2, clock, 1.0, g, size=k), replicates, seed + 200)
    law = timechange.fractional_distribution(gen, 0.6, 1.0, (2,))
    checks.append(Check("(c) GOF p time-changed migration vs spectral law",
                        stats.chisquare_gof(ends, np.arange(pm2.total + 1), law.pmf).pvalue, 1e-3, "min"))
    # (d) first event of the time-changed change-counting process
    ispec = interact.InteractingSkellamSpec.constant(0.5, 0.4, 0.3, 0.6, 0.2, 0.3, 0.1, 0.15)
    lam_bar = interact.event_rate(ispec).constant_value()
    clock = timechange.BernsteinSpec.stable(0.7)
    J = np.sort(run_blocks(lambda g, k: timechange.sample_first_event_time(clock, lam_bar, k, g),
                           replicates, seed + 300))
    grid = np.quantile(J, np.linspace(0.0025, 0.9975, 400))
    emp = np.searchsorted(J, grid, side="right") / len(J)
    surv = mittag_leffler(0.7, -lam_bar * grid**0.7)
    dist = float(np.max(np.abs((1.0 - emp) - surv)))
    checks.append(Check("(d) sup |empirical - E_alpha survival| vs DKW band", dist,
                        stats.dkw_epsilon(len(J), 1e-3)))
    return checks


# -- 13 ---------------------------------------------------------------------


def pgf_pde_residuals(**_) -> list[Check]:
    worst = 0.0
    for mu1, mu2, e1, e2 in DEATH_MIGRATION_RATES:
        spec = bdm.BdmSpec(0.0, 0.0, mu1, mu2, e1, e2, (3, 2))
        for t in (0.3, 1.0, 2.0):
            for u in (0.2, 0.5, 0.8):
                for v in (0.3, 0.6, 0.9):
                    worst = max(worst, abs(bdm.pgf_pde_residual(spec, t, u, v, 1e-4)))
    worst_pm = 0.0
    for spec in (bdm.PureMigrationSpec(1.0, 2.0, 3, 1), bdm.PureMigrationSpec(0.4, 1.3, 5, 7)):
        for t in (0.2, 0.7, 1.5):
            for u in (0.1, 0.4, 0.7, 0.95):
                worst_pm = max(worst_pm, abs(bdm.pure_migration_pgf_residual(spec, t, u, 1e-5)))
    return [Check("death-migration PGF equation residual (h=1e-4)", worst, 1e-6),
            Check("pure-migration PGF equation residual (h=1e-5)", worst_pm, 1e-6)]


# -- registry ---------------------------------------------------------------


@dataclass(frozen=True)
class Battery:
    name: str
    criterion: int
    description: str
    run: Callable[..., list]
    time_limit: float
    replicates: int | None = None

    def template(self) -> dict:
        cfg = {"schema_version": 1, "kind": "validate", "battery": self.name, "seed": DEFAULT_SEED}
        if self.replicates:
            cfg["replicates"] = self.replicates
        return cfg


CATALOG = (
    Battery("skellam-decomposition", 1, "joint PGF equals the product of the four Skellam PGFs",
            skellam_decomposition, 1.0),
    Battery("joint-pmf-dual-engine", 2, "Bessel joint pmf against Poisson-count convolution",
            joint_pmf_dual_engine, 30.0),
    Battery("sampler-vs-law", 3, "direct and decomposition samplers against each other and the joint pmf",
            sampler_vs_law, 60.0, 100_000),
    Battery("covariance-mc", 4, "Monte Carlo covariance against the closed form",
            covariance_mc, 120.0, 1_000_000),
    Battery("mean-vector", 5, "closed-form means against the moment ODE", mean_vector_check, 5.0),
    Battery("reduced-second-moments", 6, "closed-form second moments against the moment ODE",
            reduced_second_moments, 5.0),
    Battery("death-migration-multinomial", 7, "multinomial law against uniformization",
            death_migration_multinomial, 10.0),
    Battery("extinction-time", 8, "harmonic-number mean extinction time and its rational identity",
            extinction_time, 120.0, 1_000_000),
    Battery("first-passage-gf", 9, "first-passage survival against its generating function",
            first_passage_gf, 2.0),
    Battery("pure-migration", 10, "pure migration law, master equation and stationary law",
            pure_migration, 5.0),
    Battery("birth-death-difference", 11, "difference of birth-death processes against convolution",
            bd_difference, 5.0),
    Battery("fractional-migration", 12, "inverse stable clock, spectral fractional law and waiting times",
            fractional_migration, 300.0, 100_000),
    Battery("pgf-pde-residuals", 13, "finite-difference residuals of the PGF equations",
            pgf_pde_residuals, 2.0),
)

BY_NAME = {b.name: b for b in CATALOG}


def run_battery(name: str, seed: int = DEFAULT_SEED, replicates: int | None = None) -> BatteryResult:
    battery = BY_NAME[name]
    kwargs = {"seed": seed}
    if replicates is not None:
        kwargs["replicates"] = replicates
    start = time.perf_counter()
    checks = battery.run(**kwargs)
    return BatteryResult(name, checks, time.perf_counter() - start, battery.time_limit)
