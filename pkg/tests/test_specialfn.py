import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate
from scipy import special as sc

from uavcomp.errors import DomainError
from uavcomp.specialfn import (
    QuadratureSpec,
    gamma_fn,
    integrate,
    integrate_value,
    kummer_1f1,
    log_pcf_scaled,
    parabolic_cylinder_d,
    pcf_scaled,
    poly_P,
    rgamma,
    upper_incomplete_gamma,
)


class TestGamma:
    @pytest.mark.parametrize("a, expected", [(1, 1.0), (5, 24.0), (0.5, math.sqrt(math.pi))])
    def test_known_values(self, a, expected):
        assert gamma_fn(a) == pytest.approx(expected, rel=1e-14)

    def test_negative_non_integer(self):
        assert gamma_fn(-0.5) == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-14)

    @pytest.mark.parametrize("a", [0, -1, -7])
    def test_poles_raise(self, a):
        with pytest.raises(DomainError):
            gamma_fn(a)
        assert rgamma(a) == 0.0

    def test_non_finite(self):
        with pytest.raises(DomainError):
            gamma_fn(float("nan"))


class TestUpperIncompleteGamma:
    def test_exponential_case(self):
        assert upper_incomplete_gamma(1, 2) == pytest.approx(math.exp(-2), rel=1e-14)

    def test_at_zero(self):
        assert upper_incomplete_gamma(2, 0) == pytest.approx(1.0)

    def test_against_direct_integral(self):
        oracle, _ = sci_integrate.quad(lambda t: t**1.5 * math.exp(-t), 1.3, np.inf, epsabs=1e-14, epsrel=1e-13)
        assert upper_incomplete_gamma(2.5, 1.3) == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize("a, x", [(0, 1), (-1, 1), (1, -0.1)])
    def test_domain(self, a, x):
        with pytest.raises(DomainError):
            upper_incomplete_gamma(a, x)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.05, 40), st.floats(0, 80))
    def test_matches_mpmath(self, a, x):
        ref = float(mpmath.gammainc(a, x, mpmath.inf))
        assert upper_incomplete_gamma(a, x) == pytest.approx(ref, rel=1e-9, abs=1e-300)


class TestKummer:
    def test_zero_argument(self):
        assert kummer_1f1(0.3, 2.2, 0.0) == 1.0

    def test_equal_parameters_give_exponential(self):
        assert kummer_1f1(1.7, 1.7, 2.0) == pytest.approx(math.exp(2.0), rel=1e-14)

    def test_series_oracle(self):
        # 200 terms in 50-digit arithmetic, summed here independently
        with mpmath.workdps(50):
            a, b, z = mpmath.mpf("0.5"), mpmath.mpf("1.5"), mpmath.mpf("3.1")
            term, total = mpmath.mpf(1), mpmath.mpf(1)
            for n in range(200):
                term *= (a + n) / (b + n) * z / (n + 1)
                total += term
        assert kummer_1f1(0.5, 1.5, 3.1) == pytest.approx(float(total), rel=1e-13)

    def test_pole_in_b(self):
        with pytest.raises(DomainError):
            kummer_1f1(1.0, -2.0, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-5, 5), st.floats(0.1, 6), st.floats(-40, 30))
    def test_matches_mpmath(self, a, b, z):
        ref = mpmath.hyp1f1(a, b, z)
        got = kummer_1f1(a, b, z)
        assert got == pytest.approx(float(ref), rel=1e-9, abs=1e-12 * max(1.0, math.exp(min(z, 700))))

    def test_extended_precision_returns_mpf(self):
        v = kummer_1f1(0.5, 1.5, -30.0, dps=40)
        assert isinstance(v, mpmath.mpf)
        assert float(v) == pytest.approx(float(mpmath.hyp1f1(0.5, 1.5, -30.0)), rel=1e-14)


class TestParabolicCylinder:
    def test_order_zero(self):
        assert parabolic_cylinder_d(0, 1.2) == pytest.approx(math.exp(-0.36), rel=1e-13)

    def test_at_origin(self):
        # D_p(0) = 2^{p/2} sqrt(pi) / Gamma((1 - p)/2)
        expected = 2 ** (-1) * math.sqrt(math.pi) / math.gamma(1.5)
        assert parabolic_cylinder_d(-2, 0.0) == pytest.approx(expected, rel=1e-13)

    def test_definition_oracle(self):
        # D_p(z) from its two-term 1F1 definition, evaluated with mpmath
        p, z = -3.0, 1.0
        with mpmath.workdps(40):
            t1 = mpmath.sqrt(mpmath.pi) / mpmath.gamma((1 - p) / 2) * mpmath.hyp1f1(-p / 2, 0.5, z * z / 2)
            t2 = mpmath.sqrt(2 * mpmath.pi) * z / mpmath.gamma(-p / 2) * mpmath.hyp1f1((1 - p) / 2, 1.5, z * z / 2)
            ref = 2 ** (p / 2) * mpmath.exp(-z * z / 4) * (t1 - t2)
        assert parabolic_cylinder_d(p, z) == pytest.approx(float(ref), rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_hermite_values(self, n):
        z = 0.7
        herm = sc.eval_hermitenorm(n, z)
        assert parabolic_cylinder_d(n, z) == pytest.approx(math.exp(-z * z / 4) * herm, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-30, 3), st.floats(0, 25))
    def test_scaled_matches_mpmath(self, p, z):
        ref = mpmath.pcfd(p, z) * mpmath.exp(z * z / 4)
        assert pcf_scaled(p, z) == pytest.approx(float(ref), rel=1e-8)

    def test_log_scaled_beyond_double_range(self):
        p, z = -400.0, 3.0
        sign, logv = log_pcf_scaled(p, z)
        with mpmath.workdps(30):
            ref = mpmath.log(mpmath.pcfd(p, z) * mpmath.exp(z * z / 4))
        assert sign == 1
        assert logv == pytest.approx(float(ref), rel=1e-10)


class TestPolyP:
    def test_single_term(self):
        assert poly_P(0.5, 0, 7.0) == pytest.approx(math.sqrt(math.pi))

    def test_two_terms(self):
        assert poly_P(0.5, 1, 1.0) == pytest.approx(math.gamma(0.5) - math.gamma(1.5), rel=1e-14)

    def test_summation_oracle(self):
        a, n, x = 1.4, 3, 0.6
        ref = sum((-1) ** k * math.comb(n, k) * float(mpmath.gamma(k + 1 - a)) * x**k for k in range(n + 1))
        assert poly_P(a, n, x) == pytest.approx(ref, rel=1e-13)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            poly_P(0.5, -1, 1.0)


class TestIntegrate:
    def test_exponential(self):
        r = integrate(lambda t: np.exp(-t), 0.0)
        assert r.converged and r.value == pytest.approx(1.0, rel=1e-12)

    def test_first_moment(self):
        assert integrate_value(lambda t: t * np.exp(-t), 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_gamma_moment(self):
        assert integrate_value(lambda t: t**1.5 * np.exp(-t), 0.0) == pytest.approx(gamma_fn(2.5), rel=1e-11)

    def test_finite_interval_and_reversal(self):
        v = integrate_value(np.sin, 0.0, math.pi)
        assert v == pytest.approx(2.0, rel=1e-13)
        assert integrate_value(np.sin, math.pi, 0.0) == pytest.approx(-2.0, rel=1e-13)

    def test_scalar_integrand(self):
        v = integrate_value(lambda t: math.exp(-t * t), 0.0, vectorized=False)
        assert v == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)

    def test_breakpoints_far_mass(self):
        f = lambda t: np.exp(-0.5 * ((t - 1e4) / 3.0) ** 2)  # noqa: E731
        v = integrate_value(f, 0.0, breakpoints=(9940.0, 1e4, 10060.0))
        assert v == pytest.approx(3.0 * math.sqrt(2 * math.pi), rel=1e-10)

    def test_non_convergence_is_reported(self):
        r = integrate(lambda t: np.sin(1.0 / np.maximum(t, 1e-300)), 0.0, 1.0, QuadratureSpec(max_subdivisions=3))
        assert not r.converged
        assert math.isfinite(r.value)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=0)
        with pytest.raises(ValueError):
            QuadratureSpec(transform="tanh-sinh")

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.2, 30), st.floats(0.05, 20))
    def test_gamma_integrals(self, a, rate):
        v = integrate_value(lambda t: t ** (a - 1) * np.exp(-rate * t), 0.0,
                            spec=QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10, max_subdivisions=4000))
        ref = math.exp(math.lgamma(a) - a * math.log(rate))
        assert v == pytest.approx(ref, rel=1e-8)
