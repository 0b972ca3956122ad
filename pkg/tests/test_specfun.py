import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptproc.specfun import (SeriesControl, SeriesError, alternating_binomial_sum, bessel_i,
                            harmonic_number, log_bessel_i, mittag_leffler)

mp.mp.dps = 50


def ml_oracle(alpha, z):
    """Brute-force power series at 200 digits, summed until the terms are negligible."""
    with mp.workdps(200):
        a, zz = mp.mpf(alpha), mp.mpf(z)
        total, k, prev = mp.mpf(0), 0, mp.inf
        while True:
            term = abs(zz**k / mp.gamma(a * k + 1))
            total += term if k % 2 == 0 else -term
            # stop only once the terms are past their peak and negligible
            if term < prev and term < mp.mpf(10) ** -40:
                return float(total)
            prev = term
            k += 1


class TestBessel:
    def test_origin(self):
        assert bessel_i(0, 0.0) == 1.0
        assert bessel_i(3, 0.0) == 0.0

    def test_order_zero_at_two(self):
        ref = float(mp.nsum(lambda k: 1 / mp.factorial(k) ** 2, [0, mp.inf]))
        assert bessel_i(0, 2.0) == pytest.approx(ref, abs=1e-14)

    @given(st.integers(-30, 30), st.floats(1e-3, 400))
    @settings(max_examples=80, deadline=None)
    def test_log_against_mpmath(self, n, x):
        ref = float(mp.log(mp.besseli(abs(n), x)))
        assert log_bessel_i(n, x) == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_negative_order_symmetry(self):
        assert bessel_i(-4, 3.3) == bessel_i(4, 3.3)

    def test_large_argument_does_not_overflow(self):
        assert math.isfinite(log_bessel_i(5, 5e4))

    def test_negative_argument_rejected(self):
        with pytest.raises(ValueError):
            bessel_i(0, -1.0)

    def test_series_control_is_honoured(self):
        with pytest.raises(SeriesError):
            log_bessel_i(0, 50.0, SeriesControl(max_terms=3))


class TestMittagLeffler:
    def test_exponential_case(self):
        assert mittag_leffler(1.0, -1.0) == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_origin(self):
        assert mittag_leffler(0.6, 0.0) == 1.0

    def test_half_order_against_series_oracle(self):
        assert mittag_leffler(0.5, -1.0) == pytest.approx(ml_oracle(0.5, -1.0), abs=1e-14)

    @pytest.mark.parametrize("x", [0.1, 0.7, 2.0, 6.0, 25.0])
    def test_half_order_erfc_identity(self, x):
        # E_{1/2}(-x) = exp(x^2) erfc(x)
        ref = float(mp.exp(mp.mpf(x) ** 2) * mp.erfc(x))
        assert mittag_leffler(0.5, -x) == pytest.approx(ref, rel=1e-10, abs=1e-14)

    # the alternating series peaks near k ~ exp(log(x) / alpha), which bounds the oracle's range
    @given(st.floats(0.3, 0.99), st.floats(0.0, 4.0))
    @settings(max_examples=40, deadline=None)
    def test_against_series_oracle(self, alpha, x):
        assert mittag_leffler(alpha, -x) == pytest.approx(ml_oracle(alpha, -x), abs=1e-12)

    @given(st.floats(0.1, 0.99), st.floats(0.0, 200.0), st.floats(0.0, 200.0))
    @settings(max_examples=40, deadline=None)
    def test_completely_monotone(self, alpha, a, b):
        lo, hi = sorted((a, b))
        assert 0.0 <= mittag_leffler(alpha, -hi) <= mittag_leffler(alpha, -lo) + 1e-15

    @pytest.mark.parametrize("alpha,x", [(0.9999982990671352, 9.0), (0.9928169872260443, 446.5),
                                         (1 - 1e-8, 30.0), (0.999, 5.0), (0.2, 80.0), (0.65, 3000.0)])
    def test_large_argument_against_integral_oracle(self, alpha, x):
        # completely monotone representation, integrated in the Lorentzian's own angle variable
        with mp.workdps(25):
            a, xx = mp.mpf(alpha), mp.mpf(x)
            c, w = mp.cos(a * mp.pi), mp.sin(a * mp.pi)

            def f(p):
                return mp.exp(-(xx * mp.sin(p) / (w * mp.cos(p) - c * mp.sin(p))) ** (1 / a))

            s_max = mp.mpf(700) ** a / xx
            marks = [s for s in [mp.mpf(10) ** j / xx for j in range(-2, 5)] + [1] if s < s_max]
            pts = sorted({mp.mpf(0), mp.atan2(s_max * w, 1 + c * s_max)} | {mp.atan2(s * w, 1 + c * s) for s in marks})
            ref = float(mp.quad(f, pts) / (a * mp.pi))
        assert mittag_leffler(alpha, -x) == pytest.approx(ref, abs=1e-14, rel=1e-10)

    def test_continuous_at_unit_order(self):
        for x in (0.5, 3.0, 12.0):
            assert abs(mittag_leffler(1 - 1e-9, -x) - math.exp(-x)) < 1e-7

    def test_array_input(self):
        z = np.array([[0.0, -1.0], [-3.0, -40.0]])
        out = mittag_leffler(0.7, z)
        assert out.shape == z.shape
        assert out[0, 1] == pytest.approx(mittag_leffler(0.7, -1.0))

    def test_domain(self):
        with pytest.raises(ValueError):
            mittag_leffler(0.5, 1.0)
        with pytest.raises(ValueError):
            mittag_leffler(1.2, -1.0)


class TestHarmonic:
    def test_small_values(self):
        assert harmonic_number(1) == 1
        assert harmonic_number(2) == Fraction(3, 2)
        assert harmonic_number(4) == Fraction(25, 12)

    def test_positive_only(self):
        with pytest.raises(ValueError):
            harmonic_number(0)

    def test_alternating_sum_small(self):
        assert alternating_binomial_sum(1) == -1
        assert alternating_binomial_sum(2) == Fraction(-3, 2)

    @pytest.mark.parametrize("n", [5, 17, 30, 60])
    def test_alternating_sum_is_minus_harmonic(self, n):
        assert alternating_binomial_sum(n) == -harmonic_number(n)

    def test_alternating_sum_size_cap(self):
        with pytest.raises(OverflowError):
            alternating_binomial_sum(61)
