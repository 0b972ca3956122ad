import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from conftest import P_FLOOR
from ptproc import interact, ratefn
from ptproc.interact import GeneralizedInteractSpec, InteractingSkellamSpec, TrivariateSpec
from ptproc.oracle import poisson_convolution_pmf
from ptproc.skellam import (GeneralizedSkellamSpec, TruncationError, generalized_pgf, skellam_pgf,
                            skellam_pmf, skellam_support)
from ptproc.stats import chisquare_gof, chisquare_two_sample, within_standard_errors

c = ratefn.constant
NAMES = InteractingSkellamSpec.RATE_NAMES

rates = st.floats(0.0, 1.5)


@st.composite
def constant_specs(draw, initial=st.tuples(st.integers(-3, 3), st.integers(-3, 3))):
    return InteractingSkellamSpec.constant(**{k: draw(rates) for k in NAMES}, initial=draw(initial))


def mixed_spec(initial=(1, -1)):
    """Time-varying rates of every kind."""
    return InteractingSkellamSpec(
        lambda1=ratefn.tabulated([0, 1, 2], [0.4, 1.0, 0.6]), lambda2=c(0.7),
        mu1=ratefn.piecewise([0, 0.8], [0.5, 0.9]), mu2=ratefn.tabulated([0, 2], [0.3, 0.8]),
        delta1=c(0.6), delta2=ratefn.piecewise([0, 1.2], [0.9, 0.4]),
        eta12=ratefn.tabulated([0, 2], [0.5, 0.1]), eta21=c(0.25), initial=initial)


def decomposition_product(spec, t, u, v):
    s1, s2, s3, s4 = interact.decompose(spec).parts()
    return skellam_pgf(s1, t, u) * skellam_pgf(s2, t, v) * skellam_pgf(s3, t, u * v) * skellam_pgf(s4, t, u / v)


def eight_poisson_window(spec, t, window):
    jumps = [(j, r.cumulative(t)) for j, r in interact.event_menu(spec)]
    return poisson_convolution_pmf(jumps, window, spec.initial)


class TestJointPgf:
    def test_unit_argument(self):
        assert interact.joint_pgf(mixed_spec(), 1.3, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_initial_condition(self):
        spec = mixed_spec(initial=(2, 3))
        assert interact.joint_pgf(spec, 0.0, 0.5, 0.7) == pytest.approx(0.5**2 * 0.7**3)

    def test_half_half_product_identity(self):
        spec = InteractingSkellamSpec.constant(*(0.3 * (i + 1) for i in range(8)), initial=(1, 2))
        assert abs(interact.joint_pgf(spec, 1.0, 0.5, 0.5) - decomposition_product(spec, 1.0, 0.5, 0.5)) < 1e-12

    @given(constant_specs(initial=st.tuples(st.integers(0, 3), st.integers(0, 3))),
           st.floats(0.05, 2), st.floats(0.4, 1), st.floats(0.4, 1))
    @settings(max_examples=60, deadline=None)
    def test_product_identity(self, spec, t, u, v):
        # G can reach 1e5 here, so the bound scales with it
        g = interact.joint_pgf(spec, t, u, v)
        assert abs(g - decomposition_product(spec, t, u, v)) < 1e-12 * max(1.0, g)

    def test_product_identity_time_varying(self):
        spec = mixed_spec()
        for t, u, v in [(0.3, 0.6, 0.9), (1.7, 1.2, 0.8), (2.5, 0.5, 1.5)]:
            ref = decomposition_product(spec, t, u, v)
            assert interact.joint_pgf(spec, t, u, v) == pytest.approx(ref, rel=1e-12)

    def test_against_pmf(self):
        spec = mixed_spec()
        ms = np.arange(-18, 20)
        tab = interact.joint_pmf_table(spec, 1.0, ms, ms)
        u, v = 0.8, 1.1
        direct = np.sum(tab * np.outer(u ** ms.astype(float), v ** ms.astype(float)))
        assert interact.joint_pgf(spec, 1.0, u, v) == pytest.approx(direct, rel=1e-10)

    def test_non_positive_arguments_rejected(self):
        with pytest.raises(ValueError):
            interact.joint_pgf(mixed_spec(), 1.0, 0.0, 1.0)


class TestIncrementPgf:
    def test_empty_interval(self):
        assert interact.increment_pgf(mixed_spec(), 0.7, 0.7, 0.3, 2.0) == pytest.approx(1.0)

    @given(constant_specs(), st.floats(0, 2), st.floats(0, 2), st.floats(0.3, 1.5), st.floats(0.3, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_stationary_for_constant_rates(self, spec, s, d, u, v):
        a = interact.increment_pgf(spec, s, s + d, u, v)
        b = interact.increment_pgf(spec, 0.0, d, u, v)
        assert a == pytest.approx(b, rel=1e-12)

    @given(st.floats(0, 2), st.floats(0, 1), st.floats(0.3, 1.5), st.floats(0.3, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_ratio_of_pgfs(self, s, d, u, v):
        spec = mixed_spec(initial=(0, 0))
        ratio = interact.joint_pgf(spec, s + d, u, v) / interact.joint_pgf(spec, s, u, v)
        assert abs(interact.increment_pgf(spec, s, s + d, u, v) - ratio) < 1e-12 * max(1, ratio)

    def test_time_varying_increments_are_not_stationary(self):
        spec = mixed_spec()
        assert interact.increment_pgf(spec, 1.0, 1.5, 0.5, 0.5) != pytest.approx(
            interact.increment_pgf(spec, 0.0, 0.5, 0.5, 0.5), rel=1e-6)


class TestDecompose:
    def test_unit_rates(self):
        dec = interact.decompose(InteractingSkellamSpec.constant(*[1] * 8))
        assert dec.s4.rate_up.constant_value() == 2
        assert dec.s4.rate_down.constant_value() == 2

    def test_zero_products(self):
        spec = InteractingSkellamSpec.constant(lambda1=1, lambda2=1, mu1=1, mu2=1, delta1=1)
        dec = interact.decompose(spec)
        assert dec.s1.rate_up.is_zero and dec.s1.rate_down.is_zero
        assert dec.s4.rate_up.constant_value() == 1

    def test_marginal_from_parts(self):
        spec = mixed_spec()
        t = 1.4
        a, _ = interact.marginal_rates(spec)
        s1, _, s3, s4 = interact.decompose(spec).parts()
        laws = []
        for p in (s1, s3, s4):
            ks = np.arange(-40, 41) + p.initial
            laws.append((ks[0], skellam_pmf(p, t, ks)))
        conv = np.convolve(np.convolve(laws[0][1], laws[1][1]), laws[2][1])
        lo = laws[0][0] + laws[1][0] + laws[2][0]
        ks = np.arange(-10, 13)
        np.testing.assert_allclose(conv[ks - lo], skellam_pmf(a, t, ks), atol=1e-10)


class TestMarginalRates:
    def test_unit_bracket(self):
        third = 1 / 3
        spec = InteractingSkellamSpec.constant(lambda1=2, lambda2=third, mu2=third, delta2=third)
        a, _ = interact.marginal_rates(spec)
        assert a.rate_up.constant_value() == pytest.approx(2)

    def test_all_unit_rates(self):
        a, b = interact.marginal_rates(InteractingSkellamSpec.constant(*[1] * 8))
        assert a.rate_up.constant_value() == 4
        assert b.rate_down.constant_value() == 4

    def test_marginal_law_against_simulation(self, rng):
        spec = mixed_spec()
        ends = interact.sample_endpoints(spec, 1.5, 100_000, rng)
        for d, marg in enumerate(interact.marginal_rates(spec)):
            ks = skellam_support(marg, 1.5)
            assert chisquare_gof(ends[:, d], ks, skellam_pmf(marg, 1.5, ks)).pvalue > P_FLOOR


class TestJointPmf:
    def test_initial_condition(self):
        spec = mixed_spec(initial=(2, -1))
        assert interact.joint_pmf(spec, 0.0, 2, -1) == 1.0
        assert interact.joint_pmf(spec, 0.0, 2, 0) == 0.0

    def test_normalised(self):
        spec = mixed_spec()
        ms = np.arange(-20, 23)
        assert abs(interact.joint_pmf_table(spec, 1.0, ms, ms).sum() - 1) < 1e-8

    def test_against_jump_count_enumeration(self):
        spec = InteractingSkellamSpec.constant(lambda1=1, mu1=1, lambda2=1, mu2=1, delta1=1, delta2=1,
                                               initial=(2, 1))
        jumps = [(j, r.cumulative(0.5)) for j, r in interact.event_menu(spec)]
        ref = poisson_convolution_pmf(jumps, ((2, 2), (1, 1)), (2, 1), max_counts=[30] * 8)[0, 0]
        assert interact.joint_pmf(spec, 0.5, 2, 1) == pytest.approx(ref, abs=1e-14)

    def test_table_matches_pointwise(self):
        spec = mixed_spec()
        ms, ns = np.arange(-4, 5), np.arange(-5, 3)
        tab = interact.joint_pmf_table(spec, 0.9, ms, ns)
        for (i, m), (j, n) in itertools.product(enumerate(ms), enumerate(ns)):
            assert tab[i, j] == pytest.approx(interact.joint_pmf(spec, 0.9, m, n), abs=1e-14)

    def test_time_varying_against_convolution_engine(self):
        spec = mixed_spec()
        window = ((-8, 10), (-10, 8))
        ref = eight_poisson_window(spec, 1.2, window)
        tab = interact.joint_pmf_table(spec, 1.2, np.arange(-8, 11), np.arange(-10, 9))
        assert np.max(np.abs(tab - ref)) < 1e-12

    def test_small_truncation_raises(self):
        spec = InteractingSkellamSpec.constant(*[2] * 8)
        with pytest.raises(TruncationError) as info:
            interact.joint_pmf(spec, 2.0, 0, 0, truncation=2)
        assert info.value.bound > 1e-12


class TestCovariance:
    def test_zero_when_balanced(self):
        spec = InteractingSkellamSpec.constant(lambda1=1, mu1=1, lambda2=2, mu2=0.5, delta1=1)
        assert interact.covariance(spec, 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)

    def test_constant_integrand(self):
        spec = InteractingSkellamSpec.constant(lambda1=2, mu1=1, lambda2=3, mu2=1)
        assert interact.covariance(spec, 1.0, 1.0) == pytest.approx(2.0)

    def test_depends_on_earlier_time_only(self):
        spec = mixed_spec()
        assert interact.covariance(spec, 0.8, 1.0) == interact.covariance(spec, 0.8, 3.0)

    def test_against_monte_carlo(self, rng):
        spec = InteractingSkellamSpec.constant(*[0.8] * 6, eta12=1, eta21=1)
        ends = interact.sample_endpoints_at(spec, np.ones(200_000), rng).astype(float)
        x = (ends[:, 0] - ends[:, 0].mean()) * (ends[:, 1] - ends[:, 1].mean())
        ok, mean, se = within_standard_errors(x, interact.covariance(spec, 1.0, 1.0))
        assert ok, (mean, se)

    def test_against_pmf(self):
        spec = mixed_spec()
        ms = np.arange(-20, 23)
        tab = interact.joint_pmf_table(spec, 1.0, ms, ms)
        m1, m2 = ms @ tab.sum(axis=1), ms @ tab.sum(axis=0)
        cov = ms @ tab @ ms - m1 * m2
        assert interact.covariance(spec, 1.0, 1.0) == pytest.approx(cov, abs=1e-9)


class TestEventRate:
    def test_unit_rates(self):
        assert interact.event_rate(InteractingSkellamSpec.constant(*[1] * 8)).constant_value() == 10

    def test_delta_alone_is_silent(self):
        spec = InteractingSkellamSpec.constant(delta1=2, delta2=3)
        assert interact.event_rate(spec).is_zero

    def test_event_count_is_poisson(self, rng):
        spec = mixed_spec()
        rid = [len(interact.sample_path(spec, 1.0, rng).times) for _ in range(3000)]
        lam = interact.event_rate(spec).cumulative(1.0)
        ks = np.arange(40)
        assert chisquare_gof(np.array(rid), ks, sps.poisson.pmf(ks, lam)).pvalue > P_FLOOR


class TestSamplePath:
    def test_silent_spec(self, rng):
        path = interact.sample_path(InteractingSkellamSpec.constant(initial=(3, 4)), 5.0, rng)
        assert len(path.times) == 0
        assert path.endpoint() == (3, 4)

    def test_migration_conserves_total(self, rng):
        spec = InteractingSkellamSpec.constant(eta12=2.0, initial=(5, 5))
        for method in ("direct", "decomposition"):
            path = interact.sample_path(spec, 3.0, rng, method=method)
            assert np.all(path.states().sum(axis=1) == 10)

    def test_methods_agree(self, rng):
        spec = mixed_spec()
        a = interact.sample_endpoints(spec, 1.0, 100_000, rng, method="direct")
        b = interact.sample_endpoints(spec, 1.0, 100_000, rng, method="decomposition")
        key = lambda e: e[:, 0] * 1000 + e[:, 1]  # noqa: E731
        assert chisquare_two_sample(key(a), key(b)).pvalue > P_FLOOR

    def test_unknown_method(self, rng):
        with pytest.raises(ValueError):
            interact.sample_path(mixed_spec(), 1.0, rng, method="exact")

    def test_endpoints_at_match_fixed_horizon(self, rng):
        spec = InteractingSkellamSpec.constant(*[0.5] * 8, initial=(1, 1))
        a = interact.sample_endpoints_at(spec, np.full(50_000, 1.3), rng)
        b = interact.sample_endpoints(spec, 1.3, 50_000, rng)
        key = lambda e: e[:, 0] * 1000 + e[:, 1]  # noqa: E731
        assert chisquare_two_sample(key(a), key(b)).pvalue > P_FLOOR


class TestCompoundRepresentation:
    def test_unit_rates(self):
        lam, law = interact.compound_representation(InteractingSkellamSpec.constant(*[1] * 8))
        probs = dict(law)
        assert lam == 10
        for j in [(1, 1), (-1, -1), (1, 0), (0, 1), (-1, 0), (0, -1)]:
            assert probs[j] == pytest.approx(1 / 10)
        assert probs[(1, -1)] == pytest.approx(2 / 10)
        assert probs[(-1, 1)] == pytest.approx(2 / 10)

    @given(constant_specs())
    @settings(max_examples=40, deadline=None)
    def test_probabilities_sum_to_one(self, spec):
        lam, law = interact.compound_representation(spec)
        if lam > 0:
            assert sum(p for _, p in law) == pytest.approx(1.0, abs=1e-15)

    @given(constant_specs(), st.floats(0.1, 3))
    @settings(max_examples=40, deadline=None)
    def test_mean_identity(self, spec, t):
        lam, law = interact.compound_representation(spec)
        drift = lam * t * np.sum([np.array(j) * p for j, p in law], axis=0)
        a, b = interact.marginal_rates(spec)
        expect = [m.rate_up.cumulative(t) - m.rate_down.cumulative(t) for m in (a, b)]
        np.testing.assert_allclose(drift, expect, atol=1e-12)

    def test_needs_constant_rates(self):
        with pytest.raises(ValueError):
            interact.compound_representation(mixed_spec())


class TestLinearCombination:
    def test_sum_is_order_two(self):
        spec = InteractingSkellamSpec.constant(*(0.1 * (i + 1) for i in range(8)))
        g = interact.linear_combination(spec, 1, 1)
        s = spec
        val = lambda r: r.constant_value()  # noqa: E731
        assert set(g.rates) == {1, -1, 2, -2}
        assert val(g.rates[1]) == pytest.approx(val(s.lambda1 * s.delta2 + s.delta1 * s.lambda2))
        assert val(g.rates[-1]) == pytest.approx(val(s.mu1 * s.delta2 + s.delta1 * s.mu2))
        assert val(g.rates[2]) == pytest.approx(val(s.lambda1 * s.lambda2))
        assert val(g.rates[-2]) == pytest.approx(val(s.mu1 * s.mu2))

    def test_difference_carries_migration(self):
        spec = InteractingSkellamSpec.constant(*(0.1 * (i + 1) for i in range(8)))
        g = interact.linear_combination(spec, 1, -1)
        s = spec
        assert g.rates[2].constant_value() == pytest.approx((s.lambda1 * s.mu2 + s.eta21).constant_value())
        assert g.rates[-2].constant_value() == pytest.approx((s.mu1 * s.lambda2 + s.eta12).constant_value())

    @given(st.integers(-3, 3), st.integers(-3, 3), st.floats(0.1, 2), st.floats(0.6, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_pgf_substitution(self, a, b, t, u):
        if a == 0 and b == 0:
            return
        spec = mixed_spec(initial=(1, 2))
        g = interact.linear_combination(spec, a, b)
        ref = interact.joint_pgf(spec, t, u**a, u**b)
        assert abs(generalized_pgf(g, t, u) - ref) < 1e-12 * max(1, ref)


class TestGeneralizedModel:
    def test_unit_case_reproduces_decomposition(self):
        spec = mixed_spec()
        first, second = interact.generalized_marginals(GeneralizedInteractSpec.from_interacting(spec))
        a, b = interact.marginal_rates(spec)
        for terms, marg in ((first, a), (second, b)):
            g = interact.terms_as_skellam(terms)
            for t in (0.4, 1.7):
                assert g.rates[1].cumulative(t) == pytest.approx(marg.rate_up.cumulative(t), rel=1e-13)
                assert g.rates[-1].cumulative(t) == pytest.approx(marg.rate_down.cumulative(t), rel=1e-13)

    def test_no_migration_terms_without_migration(self):
        spec = GeneralizedInteractSpec({1: c(1), -2: c(0.5)}, {3: c(1)}, {}, {}, c(1), c(1))
        first, second = interact.generalized_marginals(spec)
        assert not any(t.label.startswith("M") for t in first + second)

    def test_shared_streams_are_labelled_alike(self):
        spec = GeneralizedInteractSpec({2: c(1)}, {-1: c(1)}, {3: c(0.2)}, {}, c(1), c(1))
        first, second = interact.generalized_marginals(spec)
        shared = {t.label for t in first} & {t.label for t in second}
        assert shared == {"N[2,-1]", "M12[3]"}

    def test_order_k_grouping_repartitions(self):
        K = 3
        own = {s * h: c(0.1 * h) for h in range(1, K + 1) for s in (1, -1)}
        mig = {h: c(0.05 * h) for h in range(1, K + 1)}
        spec = GeneralizedInteractSpec(own, dict(own), mig, dict(mig), c(0.7), c(0.4))
        groups = interact.order_k_grouping(spec)
        first, _ = interact.generalized_marginals(spec)
        regrouped = sorted(t.label for g in groups.values() for t in g)
        assert regrouped == sorted(t.label for t in first)
        assert {t.jump for t in groups["S1K"]} == set(own)
        assert len(groups["SN"]) == 2 * K
        assert all(t.label.startswith("N[") for t in groups["cross"])

    def test_validation(self):
        with pytest.raises(ValueError):
            GeneralizedInteractSpec({0: c(1)}, {}, {}, {}, c(1), c(1))
        with pytest.raises(ValueError):
            GeneralizedInteractSpec({1: c(1)}, {}, {-1: c(1)}, {}, c(1), c(1))


def trivariate(eta=True):
    lam = (c(0.5), c(0.3), c(0.4))
    mu = (c(0.2), c(0.6), c(0.3))
    delta = (c(0.7), c(0.5), c(0.8))
    migs = {(1, 2): c(0.3), (3, 1): c(0.2), (2, 3): c(0.15)} if eta else {}
    return TrivariateSpec(lam, mu, delta, migs, initial=(2, 0, -1))


class TestTrivariate:
    def test_thirteen_patterns(self):
        dec = interact.trivariate_decompose(trivariate())
        assert len(dec.patterns) == 13
        assert dec.incidence.shape == (3, 13)
        for s in dec.patterns:
            assert next(x for x in s if x) == 1

    def test_silent_groups(self):
        z = (c(0), c(0), c(0))
        spec = TrivariateSpec(z, z, (c(1), c(1), c(1)))
        for comp in interact.trivariate_decompose(spec).components:
            assert comp.rate_up.is_zero and comp.rate_down.is_zero

    def test_nine_components_touch_each_group(self):
        inc = interact.trivariate_decompose(trivariate()).incidence
        assert np.all(np.count_nonzero(inc, axis=1) == 9)

    def test_pattern_rates_aggregate_the_event_menu(self):
        spec = trivariate()
        dec = interact.trivariate_decompose(spec)
        menu = {}
        for j, r in interact.trivariate_event_menu(spec):
            menu[j] = menu.get(j, 0.0) + r.constant_value()
        assert len(interact.trivariate_event_menu(spec)) == 44
        for s, comp in zip(dec.patterns, dec.components):
            assert comp.rate_up.constant_value() == pytest.approx(menu.get(s, 0.0))
            neg = tuple(-x for x in s)
            assert comp.rate_down.constant_value() == pytest.approx(menu.get(neg, 0.0))

    def test_marginal_drift(self):
        spec = trivariate()
        dec = interact.trivariate_decompose(spec)
        b = [sum(spec.group_rate(g, s).constant_value() for s in (1, -1, 0)) for g in (1, 2, 3)]
        lam1, mu1 = spec.lam[0].constant_value(), spec.mu[0].constant_value()
        # group 1 moves on its own, receives (3 -> 1) or sends (1 -> 2) a migrant,
        # or moves while the (2 -> 3) migration happens elsewhere
        up = lam1 * b[1] * b[2] + 0.2 * b[1] + 0.15 * lam1
        down = mu1 * b[1] * b[2] + 0.3 * b[2] + 0.15 * mu1
        rate_up = sum(comp.rate_up.constant_value() for comp, k in zip(dec.components, dec.incidence[0]) if k == 1)
        rate_up += sum(comp.rate_down.constant_value() for comp, k in zip(dec.components, dec.incidence[0]) if k == -1)
        rate_down = sum(comp.rate_down.constant_value() for comp, k in zip(dec.components, dec.incidence[0]) if k == 1)
        rate_down += sum(comp.rate_up.constant_value() for comp, k in zip(dec.components, dec.incidence[0]) if k == -1)
        assert rate_up == pytest.approx(up)
        assert rate_down == pytest.approx(down)

    def test_monte_carlo_marginal_means(self, rng):
        spec = trivariate()
        ends = interact.sample_trivariate_endpoints(spec, 1.0, 100_000, rng, method="direct").astype(float)
        dec = interact.trivariate_decompose(spec)
        drift = np.array([c_.rate_up.constant_value() - c_.rate_down.constant_value() for c_ in dec.components])
        expect = np.array(spec.initial) + dec.incidence @ drift
        for g in range(3):
            ok, mean, se = within_standard_errors(ends[:, g], expect[g])
            assert ok, (g, mean, se)

    def test_samplers_agree(self, rng):
        spec = trivariate()
        a = interact.sample_trivariate_endpoints(spec, 1.0, 60_000, rng, method="direct")
        b = interact.sample_trivariate_endpoints(spec, 1.0, 60_000, rng, method="decomposition")
        key = lambda e: (e[:, 0] * 100 + e[:, 1]) * 100 + e[:, 2]  # noqa: E731
        assert chisquare_two_sample(key(a), key(b)).pvalue > P_FLOOR

    def test_migration_rows_conserve_total(self):
        dec = interact.trivariate_decompose(trivariate(eta=False))
        migration_like = [i for i, s in enumerate(dec.patterns) if sum(s) == 0]
        assert np.all(dec.incidence[:, migration_like].sum(axis=0) == 0)
        spec = trivariate()
        for j, r in interact.trivariate_event_menu(spec):
            if sum(j) != 0:
                continue
            assert sorted(j) in ([-1, 0, 1],)

    def test_invalid_pair(self):
        with pytest.raises(ValueError):
            TrivariateSpec((c(1),) * 3, (c(1),) * 3, (c(1),) * 3, {(1, 1): c(1)})
