import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fanocal.errors import SeriesNotConverged, TruncationError
from fanocal.specfun import (hyp1f2, laguerre_assoc, log_factorial, log_laguerre_sequence,
                             phase_average_pmf_oracle, phase_cos_moment)
from fanocal.states import phase_averaged_closed_form


def laguerre_sum(n, k, x):
    # explicit finite sum, exact rationals up to the final float conversion
    return sum((-1) ** i * math.comb(n + k, n - i) * x ** i / math.factorial(i)
               for i in range(n + 1))


def kahan_1f2(a, b1, b2, z, terms=200):
    total, comp, term = 0.0, 0.0, 1.0
    for k in range(terms):
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        term *= (a + k) / ((b1 + k) * (b2 + k)) * z / (k + 1)
    return total


class TestLogFactorial:
    def test_small_values(self):
        assert log_factorial(0) == 0.0
        assert log_factorial(1) == 0.0
        assert log_factorial(5) == pytest.approx(4.787491743, abs=1e-9)

    def test_large_value_matches_log_sum(self):
        ref = math.fsum(math.log(k) for k in range(1, 171))
        assert log_factorial(170) == pytest.approx(ref, rel=1e-13)
        assert log_factorial(170) == pytest.approx(706.5731, abs=1e-4)

    def test_exact_through_twenty(self):
        for n in range(21):
            assert log_factorial(n) == math.log(math.factorial(n))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            log_factorial(-1)


class TestLaguerre:
    def test_trivial_values(self):
        assert laguerre_assoc(0, 3, -2.5) == 1.0
        assert laguerre_assoc(1, 0, -1.0) == 2.0

    def test_n4_k2(self):
        assert laguerre_assoc(4, 2, -0.7) == pytest.approx(laguerre_sum(4, 2, -0.7), rel=1e-12)

    @pytest.mark.parametrize("x", [-5.0, -1.0, -0.1])
    def test_grid_against_explicit_sum(self, x):
        for n in range(13):
            for k in range(11):
                assert laguerre_assoc(n, k, x) == pytest.approx(laguerre_sum(n, k, x), rel=1e-10)

    def test_real_order_against_mpmath(self):
        for n, k, x in [(7, 4.3, -2.0), (30, 0.5, -0.3), (3, 7.0, 1.5)]:
            ref = float(mpmath.laguerre(n, k, x))
            assert laguerre_assoc(n, k, x) == pytest.approx(ref, rel=1e-11)

    def test_log_sequence_matches_direct(self):
        seq = log_laguerre_sequence(40, 2.0, -3.0)
        for n in (0, 1, 5, 40):
            assert seq[n] == pytest.approx(math.log(laguerre_assoc(n, 2.0, -3.0)), rel=1e-12)

    def test_log_sequence_survives_overflow(self):
        seq = log_laguerre_sequence(3000, 7.0, -50.0)
        assert np.all(np.isfinite(seq))
        assert np.all(np.diff(seq) > 0)
        ref = float(mpmath.log(mpmath.laguerre(3000, 7, -50)))
        assert seq[-1] == pytest.approx(ref, rel=1e-10)


class TestHyp1F2:
    def test_zero_argument(self):
        r = hyp1f2(1.3, 0.5, 2.0, 0.0)
        assert r.value == 1.0 and r.terms_used == 1 and r.converged

    def test_zero_numerator(self):
        assert hyp1f2(0.0, 0.5, 2.0, 3.0).value == 1.0

    def test_against_kahan_sum(self):
        r = hyp1f2(1.5, 0.5, 2.0, 4.0)
        assert r.converged
        assert r.value == pytest.approx(kahan_1f2(1.5, 0.5, 2.0, 4.0), rel=1e-10)

    @pytest.mark.parametrize("a,b1,b2,z", [(0.5, 0.5, 1.0, 0.3), (2.5, 1.5, 3.5, 16.0),
                                           (10.5, 0.5, 11.0, 50.0), (1.0, 1.5, 1.5, 200.0)])
    def test_against_mpmath(self, a, b1, b2, z):
        ref = float(mpmath.hyp1f2(a, b1, b2, z))
        assert hyp1f2(a, b1, b2, z).value == pytest.approx(ref, rel=1e-12)

    def test_termination_invariant(self):
        a, b1, b2, z = 1.5, 0.5, 2.0, 4.0
        r = hyp1f2(a, b1, b2, z)
        term = 1.0
        for k in range(r.terms_used - 1):
            term *= (a + k) / ((b1 + k) * (b2 + k)) * z / (k + 1)
        assert abs(term) <= 1e-14 * abs(r.value)

    def test_non_convergence_signalled(self):
        with pytest.raises(SeriesNotConverged):
            hyp1f2(1.0, 0.5, 0.5, 1e6, max_terms=50)

    def test_bad_lower_parameter(self):
        with pytest.raises(ValueError):
            hyp1f2(1.0, -2.0, 1.0, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5))
    def test_zero_argument_is_exactly_one(self, a, b1, b2):
        assert hyp1f2(a, b1, b2, 0.0).value == 1.0


class TestPhaseMoments:
    @pytest.mark.parametrize("k", [0, 1, 2, 3, 6, 11])
    @pytest.mark.parametrize("b", [0.0, 0.7, 3.0])
    def test_against_mpmath_quadrature(self, k, b):
        ref = mpmath.quad(lambda p: mpmath.cos(p) ** k * mpmath.exp(-b * mpmath.cos(p)),
                          [0, mpmath.pi, 2 * mpmath.pi]) / (2 * mpmath.pi)
        assert phase_cos_moment(k, b) == pytest.approx(float(ref), rel=1e-11, abs=1e-15)


class TestPhaseOracle:
    def test_reduces_to_poisson(self):
        from scipy.stats import poisson
        for a1, a2 in [(2.0, 0.0), (0.0, 2.0)]:
            p = phase_average_pmf_oracle(a1, a2, 40)
            np.testing.assert_allclose(p.probs, poisson.pmf(np.arange(41), 2.0), atol=1e-14)

    def test_matches_closed_form_example(self):
        oracle = phase_average_pmf_oracle(1.0, 1.0, 30)
        closed, err = phase_averaged_closed_form(1.0, 1.0, 30)
        assert np.max(np.abs(oracle.probs - closed)) <= 1e-8
        assert np.all(err < 1e-12)

    def test_normalized(self):
        p = phase_average_pmf_oracle(3.0, 2.0, 60)
        assert abs(p.probs.sum() - 1.0) <= 1e-9
        assert p.tail < 1e-9

    def test_truncation_reported(self):
        with pytest.raises(TruncationError):
            phase_average_pmf_oracle(5.0, 5.0, 5)

    def test_against_mpmath_integral(self):
        a1, a2, n = 2.0, 0.7, 4
        lam = lambda p: a1 + a2 + 2 * mpmath.sqrt(a1 * a2) * mpmath.cos(p)
        ref = mpmath.quad(lambda p: mpmath.exp(-lam(p)) * lam(p) ** n / mpmath.factorial(n),
                          [0, 2 * mpmath.pi]) / (2 * mpmath.pi)
        assert phase_average_pmf_oracle(a1, a2, 40).probs[n] == pytest.approx(float(ref), rel=1e-12)
