"""Tests for the special-function kernel and the series evaluator."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import special

from tasim.special import functions
from tasim.special.functions import DomainError, PoleError
from tasim.special.precision import (
    DoubleBackend,
    MpBackend,
    NumericalFailureError,
    evaluate_series,
)


class TestGamma:
    """Tests for the Gamma function family."""

    def test_integer_and_half_integer_values(self):
        assert functions.gamma_fn(5) == pytest.approx(24.0)
        assert functions.gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi))

    def test_negative_non_integer_uses_reflection(self):
        # Γ(-0.5) = -2 sqrt(pi)
        assert functions.gamma_fn(-0.5) == pytest.approx(-2 * math.sqrt(math.pi))

    @pytest.mark.parametrize("x", [0, -1, -3])
    def test_poles(self, x):
        with pytest.raises(PoleError, match="pole"):
            functions.gamma_fn(x)
        with pytest.raises(PoleError):
            functions.log_gamma(x)

    def test_log_gamma_large_argument(self):
        assert functions.log_gamma(500.0) == pytest.approx(math.lgamma(500.0))


class TestIncompleteGamma:
    """Tests for the regularized incomplete gamma functions."""

    def test_known_value(self):
        # P(2, 1) = 1 - 2/e
        assert functions.reg_lower_gamma(2, 1) == pytest.approx(0.26424111765711533, rel=1e-14)

    def test_complement(self):
        for a, x in [(0.5, 0.3), (3.0, 2.0), (10.0, 25.0)]:
            total = functions.reg_lower_gamma(a, x) + functions.reg_upper_gamma(a, x)
            assert total == pytest.approx(1.0, abs=1e-14)

    def test_zero_argument(self):
        assert functions.reg_lower_gamma(2.0, 0.0) == 0.0
        assert functions.reg_upper_gamma(2.0, 0.0) == 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            functions.reg_lower_gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            functions.reg_upper_gamma(1.0, -1.0)


class TestBesselK:
    """Tests for K_nu and its log/scaled forms."""

    def test_known_value(self):
        assert functions.bessel_k(1, 1.0) == pytest.approx(0.6019072301972346, rel=1e-14)

    def test_even_in_order(self):
        assert functions.bessel_k(-2.5, 3.0) == pytest.approx(functions.bessel_k(2.5, 3.0), rel=1e-14)

    def test_near_integer_order_snaps(self):
        assert functions.bessel_k(2 + 1e-8, 1.5) == functions.bessel_k(2, 1.5)

    def test_half_order_closed_form(self):
        # K_{1/2}(z) = sqrt(pi/(2z)) e^{-z}
        z = 2.0
        assert functions.bessel_k(0.5, z) == pytest.approx(math.sqrt(math.pi / (2 * z)) * math.exp(-z), rel=1e-13)

    def test_log_form_survives_underflow(self):
        # K_0(1000) underflows in double, its log does not
        assert functions.bessel_k(0, 1000.0) == 0.0
        expected = 0.5 * math.log(math.pi / 2000.0) - 1000.0
        assert functions.log_bessel_k(0, 1000.0) == pytest.approx(expected, rel=1e-6)

    def test_log_form_survives_overflow(self):
        # K_80(1e-3) overflows in double
        expected = math.lgamma(80) + math.log(0.5) + 80 * math.log(2 / 1e-3)
        assert functions.log_bessel_k(80, 1e-3) == pytest.approx(expected, rel=1e-6)

    def test_scaled(self):
        assert functions.bessel_k_scaled(1, 1.0) == pytest.approx(0.6019072301972346 * math.e, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError, match="z > 0"):
            functions.bessel_k(1, 0.0)

    def test_recurrence(self):
        for nu, z in [(0.3, 0.7), (1.7, 4.0), (3.2, 12.0)]:
            lhs = functions.bessel_k(nu + 1, z)
            rhs = functions.bessel_k(nu - 1, z) + 2 * nu / z * functions.bessel_k(nu, z)
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestHypergeometricU:
    """Tests for log U and the Whittaker function."""

    def test_u_against_scipy(self):
        value, sign = functions.log_hyperu(1.5, 2.5, 3.0)
        assert sign == 1
        assert math.exp(value) == pytest.approx(special.hyperu(1.5, 2.5, 3.0), rel=1e-12)

    def test_u_with_zero_first_parameter(self):
        assert functions.log_hyperu(0, 1.3, 2.0) == (0.0, 1)

    def test_u_domain(self):
        with pytest.raises(DomainError):
            functions.log_hyperu(1.0, 1.0, 0.0)

    def test_whittaker_reduces_to_bessel(self):
        # W_{0,b}(z) = sqrt(z/pi) K_b(z/2)
        for b, z in [(0.0, 1.0), (0.3, 5.0), (2.5, 20.0)]:
            result = functions.whittaker_w(0.0, b, z)
            assert result.converged
            expected = math.sqrt(z / math.pi) * functions.bessel_k(b, z / 2)
            assert result.value == pytest.approx(expected, rel=1e-10)

    def test_whittaker_exponential_case(self):
        # W_{k, k-1/2}(z) = e^{-z/2} z^k
        result = functions.whittaker_w(1.5, 1.0, 2.0)
        assert result.value == pytest.approx(math.exp(-1.0) * 2.0 ** 1.5, rel=1e-12)

    def test_whittaker_domain(self):
        with pytest.raises(DomainError):
            functions.whittaker_w(0.0, 0.5, -1.0)


class TestGaussianQ:
    """Tests for the Q-function."""

    def test_known_values(self):
        assert functions.gaussian_q(0.0) == 0.5
        assert functions.gaussian_q(3.0) == pytest.approx(1.349898031630095e-3, rel=1e-12)

    def test_deep_tail_does_not_underflow_early(self):
        assert 0 < functions.gaussian_q(30.0) < 1e-190

    def test_array_argument(self):
        values = functions.gaussian_q(np.array([0.0, 3.0]))
        assert isinstance(values, np.ndarray)
        assert values[0] == 0.5
        assert values[1] == functions.gaussian_q(3.0)


class _Term:
    def __init__(self, coef, rate, power=0):
        self.coef = Fraction(coef)
        self.rate = Fraction(rate)
        self.power = power


def _exp_kernel(x):
    def kernel(backend, term):
        return -backend.number(term.rate) * backend.number(x)
    return kernel


class TestEvaluateSeries:
    """Tests for the precision-escalating series evaluator."""

    def test_well_conditioned_series_stays_double(self):
        # 1 - e^{-x}
        result = evaluate_series(Fraction(1), [_Term(-1, 1)], _exp_kernel(2.0))
        assert result.precision == "double"
        assert result.value == pytest.approx(1 - math.exp(-2.0), rel=1e-15)

    def test_cancellation_escalates_to_mpmath(self):
        # 1 - e^{-x} at tiny x cancels catastrophically in double
        x = 1e-12
        result = evaluate_series(Fraction(1), [_Term(-1, 1)], _exp_kernel(x))
        assert result.precision.startswith("mp")
        assert result.value == pytest.approx(-math.expm1(-x), rel=1e-12)

    def test_absolute_tolerance_accepts_rounded_value(self):
        x = 1e-20
        result = evaluate_series(Fraction(1), [_Term(-1, 1)], _exp_kernel(x), abs_tol=1e-12)
        assert result.precision == "double"
        assert result.value == pytest.approx(0.0, abs=1e-12)

    def test_negative_series_fails(self):
        with pytest.raises(NumericalFailureError, match="could not be evaluated"):
            evaluate_series(Fraction(1), [_Term(-2, 1)], _exp_kernel(0.0))

    def test_backends_agree(self):
        double, mp = DoubleBackend(), MpBackend(40)
        assert float(mp.log_bessel_k(1.5, mp.number(2.0))) == pytest.approx(double.log_bessel_k(1.5, 2.0), rel=1e-13)
        assert float(mp.lgamma(7.5)) == pytest.approx(double.lgamma(7.5), rel=1e-14)
        assert float(mp.log(Fraction(3, 7))) == pytest.approx(double.log(Fraction(3, 7)), rel=1e-14)
