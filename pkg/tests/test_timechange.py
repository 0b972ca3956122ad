import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import P_FLOOR
from ptproc import bdm, interact, timechange
from ptproc.bdm import BdmSpec, PureMigrationSpec
from ptproc.interact import InteractingSkellamSpec
from ptproc.oracle import FiniteGenerator, build_pure_migration_generator, transient_pmf
from ptproc.specfun import mittag_leffler
from ptproc.stats import chisquare_gof, dkw_epsilon, within_standard_errors
from ptproc.timechange import BernsteinSpec, SpectralFallbackWarning

PM = PureMigrationSpec(1.0, 2.0, 2, 1)


class TestBernsteinSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            BernsteinSpec.stable(1.5)
        with pytest.raises(ValueError):
            BernsteinSpec.gamma(0.0, 1.0)
        with pytest.raises(ValueError):
            BernsteinSpec.stable(0.5, drift=-1.0)
        with pytest.raises(ValueError):
            BernsteinSpec("tabulated", tail_grid=(0.5, 1.0), tail_values=(1.0, 2.0))

    def test_flags(self):
        assert BernsteinSpec.stable(1.0).is_deterministic
        assert BernsteinSpec.stable(0.6).is_pure_stable
        assert not BernsteinSpec.stable(0.6, drift=1.0).is_pure_stable


class TestLevySymbol:
    def test_stable(self):
        assert timechange.levy_symbol(BernsteinSpec.stable(0.5), 4.0) == pytest.approx(2.0)

    def test_origin_is_killing(self):
        assert timechange.levy_symbol(BernsteinSpec.stable(0.5, killing=0.3, drift=2.0), 0.0) == 0.3

    def test_gamma(self):
        assert timechange.levy_symbol(BernsteinSpec.gamma(1.0, 1.0), math.e - 1) == pytest.approx(1.0)

    @given(st.floats(0.01, 20))
    @settings(max_examples=20, deadline=None)
    def test_tabulated_matches_direct_integral(self, x):
        grid = (0.1, 0.5, 1.0, 3.0)
        vals = (4.0, 1.5, 0.6, 0.2)
        spec = BernsteinSpec("tabulated", tail_grid=grid, tail_values=vals, drift=0.3)

        def tail(w):
            return float(np.interp(w, grid, vals)) if w <= 3.0 else 0.0

        # f(x) = b x + x int_0^inf e^{-xw} tail(w) dw
        pieces = [(0, 0.1), (0.1, 0.5), (0.5, 1.0), (1.0, 3.0)]
        ref = sum(integrate.quad(lambda w: math.exp(-x * w) * tail(w), a, b, epsabs=1e-14)[0] for a, b in pieces)
        assert timechange.levy_symbol(spec, x) == pytest.approx(0.3 * x + x * ref, rel=1e-9)


class TestSubordinator:
    def test_pure_drift(self, rng):
        x = np.linspace(0.1, 2, 20)
        H = timechange.sample_subordinator(BernsteinSpec.stable(1.0), x, rng, size=3)
        np.testing.assert_allclose(H, np.tile(x, (3, 1)))

    @pytest.mark.parametrize("alpha", [0.4, 0.7])
    def test_stable_laplace_transform(self, rng, alpha):
        H = timechange.sample_subordinator(BernsteinSpec.stable(alpha), [1.0], rng, size=100_000)[:, 0]
        ok, mean, se = within_standard_errors(np.exp(-H), math.exp(-1.0))
        assert ok, (mean, se)

    def test_gamma_laplace_transform(self, rng):
        spec = BernsteinSpec.gamma(2.0, 3.0, drift=0.5)
        H = timechange.sample_subordinator(spec, [0.5, 1.5], rng, size=100_000)[:, 1]
        y = 0.8
        ok, mean, se = within_standard_errors(np.exp(-y * H), math.exp(-1.5 * timechange.levy_symbol(spec, y)))
        assert ok, (mean, se)

    def test_paths_are_non_decreasing(self, rng):
        H = timechange.sample_subordinator(BernsteinSpec.stable(0.5), np.linspace(0.01, 1, 50), rng, size=500)
        assert np.all(np.diff(H, axis=1) >= 0)

    def test_killing_sends_paths_to_infinity(self, rng):
        H = timechange.sample_subordinator(BernsteinSpec.stable(0.5, killing=5.0), [10.0], rng, size=1000)
        assert np.mean(np.isinf(H)) > 0.99


class TestInverse:
    def test_pure_drift(self, rng):
        np.testing.assert_array_equal(timechange.sample_inverse(BernsteinSpec.stable(1.0), 1.7, rng, size=4),
                                      np.full(4, 1.7))

    def test_origin(self, rng):
        assert np.all(timechange.sample_inverse(BernsteinSpec.stable(0.5), 0.0, rng, size=5) == 0)

    @pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
    def test_stable_mean(self, rng, alpha):
        L = timechange.sample_inverse(BernsteinSpec.stable(alpha), 2.0, rng, size=100_000)
        ok, mean, se = within_standard_errors(L, 2.0**alpha / math.gamma(1 + alpha))
        assert ok, (mean, se)

    def test_laplace_transform(self, rng):
        L = timechange.sample_inverse(BernsteinSpec.stable(0.7), 1.0, rng, size=100_000)
        target = timechange.laplace_of_inverse(BernsteinSpec.stable(0.7), 1.0, 2.0)
        ok, mean, se = within_standard_errors(np.exp(-2.0 * L), target)
        assert ok, (mean, se)

    @pytest.mark.parametrize("spec", [BernsteinSpec.gamma(1.5, 2.0), BernsteinSpec.stable(0.6, drift=0.8),
                                      BernsteinSpec.gamma(0.7, 1.0, drift=0.4)])
    def test_inverse_relation(self, rng, spec):
        # P{L(t) > x} = P{H(x) < t}
        t, x = 1.0, 0.6
        L = timechange.sample_inverse(spec, t, rng, size=100_000)
        H = timechange.sample_subordinator(spec, [x], rng, size=100_000)[:, 0]
        diff = (L > x).mean() - (H < t).mean()
        assert abs(diff) < 4 * math.sqrt(0.5 / 100_000)

    def test_killing_caps_the_clock(self, rng):
        L = timechange.sample_inverse(BernsteinSpec.stable(0.5, killing=1.0), 50.0, rng, size=20_000)
        ok, mean, se = within_standard_errors(L, 1.0, k=4)
        assert mean < 1.05

    def test_path_is_monotone_and_close_to_exact(self, rng):
        spec = BernsteinSpec.stable(0.6)
        grid = np.linspace(0.05, 2, 40)
        ends = np.array([timechange.sample_inverse_path(spec, grid, rng).values[-1] for _ in range(3000)])
        path = timechange.sample_inverse_path(spec, grid, rng)
        assert np.all(np.diff(path.values) >= 0)
        ok, mean, se = within_standard_errors(ends, 2.0**0.6 / math.gamma(1.6), k=4)
        assert ok, (mean, se)


class TestLaplaceOfInverse:
    def test_zero_argument(self):
        assert timechange.laplace_of_inverse(BernsteinSpec.stable(0.4), 3.0, 0.0) == 1.0

    def test_deterministic_clock(self):
        assert timechange.laplace_of_inverse(BernsteinSpec.stable(1.0), 1.5, 2.0) == pytest.approx(math.exp(-3.0))

    def test_needs_pure_stable(self):
        with pytest.raises(ValueError):
            timechange.laplace_of_inverse(BernsteinSpec.gamma(1, 1), 1.0, 1.0)


class TestTimeChangedSample:
    def test_deterministic_clock_is_the_base_process(self, rng):
        a = timechange.time_changed_sample(PM, BernsteinSpec.stable(1.0), 0.8, rng, size=100_000)
        ks = np.arange(PM.total + 1)
        assert chisquare_gof(a, ks, bdm.pure_migration_pmf(PM, 0.8, ks)).pvalue > P_FLOOR

    def test_origin(self, rng):
        spec = InteractingSkellamSpec.constant(*[1] * 8, initial=(2, -3))
        out = timechange.time_changed_sample(spec, BernsteinSpec.stable(0.5), 0.0, rng, size=10)
        assert np.all(out == [2, -3])

    def test_pure_migration_against_fractional_law(self, rng):
        dist = timechange.fractional_distribution(build_pure_migration_generator(PM), 0.6, 1.0, (PM.n1,))
        out = timechange.time_changed_sample(PM, BernsteinSpec.stable(0.6), 1.0, rng, size=100_000)
        assert chisquare_gof(out, np.arange(PM.total + 1), dist.pmf).pvalue > P_FLOOR

    def test_death_migration_against_fractional_law(self, rng):
        from ptproc.oracle import build_death_migration_generator

        spec = BdmSpec(mu1=0.7, mu2=0.4, eta1=0.5, eta2=0.9, initial=(2, 1))
        gen = build_death_migration_generator(spec)
        dist = timechange.fractional_distribution(gen, 0.75, 1.2, (2, 1))
        out = timechange.time_changed_sample(spec, BernsteinSpec.stable(0.75), 1.2, rng, size=50_000)
        key = np.array([gen.index[tuple(s)] for s in out.tolist()])
        assert chisquare_gof(key, np.arange(gen.size), dist.pmf).pvalue > P_FLOOR

    def test_interacting_mean_follows_the_clock(self, rng):
        spec = InteractingSkellamSpec.constant(0.9, 0.3, 0.2, 0.5, 0.4, 0.6, 0.1, 0.2)
        a, _ = interact.marginal_rates(spec)
        drift = a.rate_up.constant_value() - a.rate_down.constant_value()
        out = timechange.time_changed_sample(spec, BernsteinSpec.stable(0.5), 1.0, rng, size=100_000)
        ok, mean, se = within_standard_errors(out[:, 0], drift / math.gamma(1.5))
        assert ok, (mean, se)

    def test_callable_base(self, rng):
        out = timechange.time_changed_sample(lambda tau, g: tau, BernsteinSpec.stable(1.0), 2.0, rng, size=3)
        np.testing.assert_array_equal(out, [2.0, 2.0, 2.0])


class TestFractionalDistribution:
    def test_deterministic_clock_is_the_chain(self):
        gen = build_pure_migration_generator(PureMigrationSpec(1.0, 2.0, 3, 2))
        dist = timechange.fractional_distribution(gen, 1.0, 0.7, (3,))
        assert np.max(np.abs(dist.pmf - transient_pmf(gen, (3,), 0.7))) < 1e-10

    def test_origin(self):
        gen = build_pure_migration_generator(PM)
        dist = timechange.fractional_distribution(gen, 0.6, 0.0, (2,))
        np.testing.assert_array_equal(dist.pmf, gen.point_mass((2,)))

    def test_worked_case(self):
        gen = build_pure_migration_generator(PM)
        dist = timechange.fractional_distribution(gen, 0.6, 1.0, (2,))
        assert np.all((dist.pmf >= 0) & (dist.pmf <= 1))
        assert abs(dist.pmf.sum() - 1) < 1e-10
        assert timechange.fractional_master_residual(dist, gen) < 1e-8

    @given(st.floats(0.2, 1.0), st.floats(0.0, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_normalised_with_mittag_leffler_clock(self, alpha, t):
        gen = build_pure_migration_generator(PM)
        dist = timechange.fractional_distribution(gen, alpha, t, (2,))
        assert abs(dist.pmf.sum() - 1) < 1e-10
        # the inverse stable clock's Laplace transform is E_alpha(-y t^alpha)
        y = 0.7
        lt = timechange.laplace_of_inverse(BernsteinSpec.stable(alpha), t, y)
        assert lt == pytest.approx(float(mittag_leffler(alpha, -y * t**alpha)), abs=1e-15)

    def test_ill_conditioned_generator_uses_laplace_inversion(self):
        # a Jordan-like chain: 0 -> 1 -> 2 with equal rates has a defective eigenbasis
        Q = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]])
        gen = FiniteGenerator(((0,), (1,), (2,)), Q)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            dist = timechange.fractional_distribution(gen, 1.0, 0.8, (0,))
        assert dist.method == "laplace"
        assert any(issubclass(w.category, SpectralFallbackWarning) for w in caught)
        assert np.max(np.abs(dist.pmf - transient_pmf(gen, (0,), 0.8))) < 1e-8


class TestWaitingTimes:
    def test_deterministic_clock(self):
        assert timechange.renewal_waiting_survival(BernsteinSpec.stable(1.0), 2.0, 0.5) == pytest.approx(math.exp(-1))

    def test_origin(self):
        assert timechange.renewal_waiting_survival(BernsteinSpec.stable(0.6), 2.0, 0.0) == 1.0

    def test_first_event_survival_within_dkw_band(self, rng):
        spec_base = InteractingSkellamSpec.constant(0.5, 0.4, 0.3, 0.6, 0.7, 0.2, 0.1, 0.3)
        lam = interact.event_rate(spec_base).constant_value()
        clock = BernsteinSpec.stable(0.7)
        n = 100_000
        times = np.sort(timechange.sample_first_event_time(clock, lam, n, rng))
        grid = np.quantile(times, np.linspace(0.0025, 0.9975, 400))
        emp = 1 - np.searchsorted(times, grid, side="right") / n
        ref = np.array([timechange.renewal_waiting_survival(clock, lam, t) for t in grid])
        assert np.max(np.abs(emp - ref)) < dkw_epsilon(n, 1e-3)

    def test_first_event_matches_time_changed_count(self, rng):
        # the first event happens after t exactly when the time-changed count is still 0 at t
        spec_base = InteractingSkellamSpec.constant(0.5, 0.4, 0.3, 0.6, 0.7, 0.2, 0.1, 0.3)
        lam = interact.event_rate(spec_base).constant_value()
        L = timechange.sample_inverse(BernsteinSpec.stable(0.7), 0.9, rng, size=100_000)
        silent = rng.poisson(lam * L) == 0
        ok, mean, se = within_standard_errors(silent.astype(float),
                                              timechange.renewal_waiting_survival(BernsteinSpec.stable(0.7), lam, 0.9))
        assert ok, (mean, se)


class TestAlphaInterpolation:
    @staticmethod
    def mean(alpha, t=1.0, spec=PureMigrationSpec(1.0, 2.0, 3, 1)):
        dist = timechange.fractional_distribution(build_pure_migration_generator(spec), alpha, t, (spec.n1,))
        return float(np.dot([s[0] for s in dist.states], dist.pmf))

    def test_unit_alpha_is_the_classical_mean(self):
        spec = PureMigrationSpec(1.0, 2.0, 3, 1)
        ks = np.arange(spec.total + 1)
        classical = float(np.dot(ks, bdm.pure_migration_pmf(spec, 1.0, ks)))
        assert abs(self.mean(1.0) - classical) < 1e-10

    def test_mean_is_smooth_in_alpha(self):
        alphas = np.round(np.arange(0.05, 1.0 + 1e-9, 0.01), 10)
        means = np.array([self.mean(a) for a in alphas])
        assert np.all(np.isfinite(means))
        # the mean moves by a few 1e-3 per step, so smoothness is judged on second differences
        assert np.max(np.abs(np.diff(means, 2))) < 1e-4
        # and it sits between the frozen initial value and the classical mean
        assert np.all((means <= 3 + 1e-12) & (means >= means[-1] - 1e-12))

    @pytest.mark.parametrize("alpha", [0.1, 0.35, 0.6, 0.85, 1.0])
    @pytest.mark.parametrize("t", [0.2, 1.0, 5.0])
    def test_probability_vector(self, alpha, t):
        from ptproc.oracle import build_death_migration_generator

        for gen, init in ((build_pure_migration_generator(PureMigrationSpec(0.7, 1.3, 4, 2)), (4,)),
                          (build_death_migration_generator(BdmSpec(mu1=1.0, mu2=2.0, eta1=0.5, eta2=0.25,
                                                                   initial=(3, 2))), (3, 2))):
            p = timechange.fractional_distribution(gen, alpha, t, init).pmf
            assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-10
