import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermeval

from empgauss.empirical import KernelSpec
from empgauss.errors import DegreeTooLarge, InvalidParameter
from empgauss.hermite import (
    MAX_DEGREE,
    PanelRule,
    aggregation_partial_sums,
    aggregation_residual,
    aggregation_target,
    coeff,
    coefficient_table,
    coefficients,
    gauss_hermite,
    gram_matrix,
    h_eval,
    hermite_functions,
    hermite_table,
    pair_expectation,
)
from empgauss.sampler import normal_cdf

# (k, t, ε) -> (c_k, c_k') from adaptive scipy quad split at the kinks
QUAD_ORACLE = {
    (1, 0.5, 0.25): (-0.38570690033560007, 0.0),
    (2, 0.3, 0.25): (0.11675541086951755, -0.42133294585773773),
    (3, 0.7, 0.1): (0.10080360766532029, -0.5774851865319535),
    (5, 0.5, 0.25): (-0.09212477604732894, 0.0),
    (4, 0.05, 0.1): (-0.01749056879294891, -0.6668661435524097),
}


class TestPolynomials:
    def test_low_degrees(self):
        assert h_eval(0, 1.3) == 1.0
        assert h_eval(1, 1.3) == 1.3
        assert h_eval(2, 1.0) == 0.0
        assert h_eval(3, 2.0) == pytest.approx((8 - 6) / math.sqrt(6))

    @pytest.mark.parametrize("k", [0, 1, 4, 10, 25])
    def test_matches_numpy_hermite_e(self, k):
        x = np.linspace(-5, 5, 41)
        c = np.zeros(k + 1)
        c[k] = 1.0
        ref = hermeval(x, c) / math.sqrt(math.factorial(k))
        np.testing.assert_allclose(hermite_table(k, x)[-1], ref, rtol=1e-10, atol=1e-10)

    def test_hermite_functions_finite_at_high_degree(self):
        v = hermite_functions(MAX_DEGREE, np.linspace(-40, 40, 801))
        assert np.all(np.isfinite(v))

    def test_degree_limits(self):
        with pytest.raises(DegreeTooLarge):
            hermite_table(MAX_DEGREE + 1, 0.0)
        with pytest.raises(InvalidParameter):
            hermite_table(-1, 0.0)
        with pytest.raises(DegreeTooLarge):
            pair_expectation(0.5, 51, 0)


class TestQuadrature:
    def test_weights_normalized(self):
        rule = gauss_hermite(64)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert rule.integrate(rule.nodes ** 2) == pytest.approx(1.0, abs=1e-12)
        assert rule.integrate(rule.nodes ** 4) == pytest.approx(3.0, abs=1e-11)

    def test_gram_identity(self):
        g = gram_matrix(20, gauss_hermite(128))
        assert np.max(np.abs(g - np.eye(21))) <= 1e-8

    @pytest.mark.parametrize("sigma,k,k2,expected", [
        (0.5, 2, 2, 0.25), (0.5, 2, 3, 0.0), (1.0, 5, 5, 1.0), (-0.9, 3, 3, -0.729), (0.0, 0, 0, 1.0),
    ])
    def test_pair_expectation_examples(self, sigma, k, k2, expected):
        assert pair_expectation(sigma, k, k2) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-1, 1), st.integers(0, 12), st.integers(0, 12))
    def test_pair_expectation_identity(self, sigma, k, k2):
        exact = sigma ** k if k == k2 else 0.0
        assert pair_expectation(sigma, k, k2) == pytest.approx(exact, abs=1e-9)

    def test_pair_expectation_monte_carlo(self):
        rng = np.random.default_rng(7)
        sigma = 0.6
        u = rng.standard_normal(10 ** 6)
        v = sigma * u + math.sqrt(1 - sigma ** 2) * rng.standard_normal(10 ** 6)
        prod = h_eval(2, u) * h_eval(2, v)
        se = prod.std() / 1e3
        assert abs(prod.mean() - pair_expectation(sigma, 2, 2)) < 5 * se

    def test_bad_sigma(self):
        with pytest.raises(InvalidParameter):
            pair_expectation(1.5, 1, 1)


class TestCoefficients:
    @pytest.mark.parametrize("key", sorted(QUAD_ORACLE))
    def test_against_quad_oracle(self, key):
        k, t, eps = key
        c, cp = QUAD_ORACLE[key]
        kern = KernelSpec(eps)
        assert coeff(kern, k, t) == pytest.approx(c, abs=1e-12)
        assert coeff(kern, k, t, derivative=True) == pytest.approx(cp, abs=1e-12)

    @pytest.mark.parametrize("t", [-0.3, 0.0, 0.1, 0.5, 0.97, 1.2, 1.6])
    def test_zeroth_coefficient_is_smoothed_mean(self, t):
        kern = KernelSpec(0.25)
        assert coeff(kern, 0, t) == pytest.approx(float(kern.smoothed_mean(t)), abs=1e-12)
        assert coeff(kern, 0, t, derivative=True) == pytest.approx(float(kern.window_mean_prime(t)), abs=1e-12)

    def test_outside_support(self):
        kern = KernelSpec(0.2)
        np.testing.assert_array_equal(coefficients(kern, -0.5, 10), np.zeros(11))
        c = coefficients(kern, 1.5, 10)
        assert c[0] == 1.0 and np.all(c[1:] == 0.0)
        np.testing.assert_array_equal(coefficients(kern, 1.5, 10, derivative=True), np.zeros(11))

    @pytest.mark.parametrize("k,t", [(1, 0.3), (2, 0.6), (4, 0.12), (7, 0.8)])
    def test_derivative_is_t_derivative(self, k, t):
        kern = KernelSpec(0.2)
        h = 1e-5
        fd = (coeff(kern, k, t + h) - coeff(kern, k, t - h)) / (2 * h)
        assert coeff(kern, k, t, derivative=True) == pytest.approx(fd, abs=1e-7)

    @pytest.mark.parametrize("k,t,derivative", [(1, 0.4, False), (3, 0.6, True), (2, 0.2, True)])
    def test_monte_carlo_cross_check(self, k, t, derivative):
        kern = KernelSpec(0.25)
        z = np.random.default_rng(11).standard_normal(10 ** 6)
        f = kern.ell_prime if derivative else kern.ell
        vals = f(t - normal_cdf(z)) * h_eval(k, z)
        se = vals.std() / 1e3
        assert abs(vals.mean() - coeff(kern, k, t, derivative=derivative)) < 5 * se

    def test_gauss_hermite_route_is_rougher_but_close(self):
        kern = KernelSpec(0.25)
        gh = coefficients(kern, 0.3, 8, rule=gauss_hermite(128))
        panels = coefficients(kern, 0.3, 8)
        np.testing.assert_allclose(gh, panels, atol=1e-3)

    def test_panel_rule_refinement_stable(self):
        kern = KernelSpec(0.1)
        a = coefficients(kern, 0.45, 60, True)
        b = coefficients(kern, 0.45, 60, True, PanelRule(order=48, width=0.1))
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_table_csv(self, tmp_path):
        tab = coefficient_table(KernelSpec(0.25), [0.2, 0.5], 4)
        assert tab.c.shape == (2, 5)
        tab.to_csv(tmp_path / "c.csv")
        back = np.loadtxt(tmp_path / "c.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(back[:, 1:], tab.c)


class TestAggregation:
    @pytest.mark.parametrize("eps,t", [(0.25, 0.5), (0.1, 0.3), (0.5, 0.9)])
    def test_approaches_target_from_below(self, eps, t):
        kern = KernelSpec(eps)
        ps = aggregation_partial_sums(kern, t, 200)
        target = aggregation_target(kern, t)
        assert np.all(np.diff(ps) >= 0)
        assert ps[-1] <= target + 1e-12

    @pytest.mark.parametrize("eps,t", [(0.25, 0.5), (0.1, 0.5)])
    def test_residual_shrinks_with_k(self, eps, t):
        kern = KernelSpec(eps)
        r = [aggregation_residual(kern, t, K).residual for K in (50, 200, 500)]
        assert r[0] > r[1] > r[2] > 0

    def test_target_closed_form(self):
        # interior window: ∫ℓ'² = 2/(3ε), ∫ℓ' = 1
        kern = KernelSpec(0.2)
        assert aggregation_target(kern, 0.5) == pytest.approx(2 / 0.6 - 1, rel=1e-14)
