import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from empgauss.bounds import (
    LEMMA1_CONSTANT,
    SATURATED_EPSILON,
    bound_report,
    combined_bound,
    d_functional,
    d_functional_upper,
    epsilon_star,
    lemma1_bound,
    theorem2_bound,
    window_variance,
)
from empgauss.empirical import KernelSpec
from empgauss.errors import InvalidParameter

# D(ℓ) from nested adaptive scipy quad of the window variance
D_ORACLE = {
    0.05: 3.5152050675126563,
    0.125: 2.0956303745333207,
    0.25: 1.3354150416006751,
    0.5: 0.752772652709081,
}


class TestDFunctional:
    @pytest.mark.parametrize("eps", sorted(D_ORACLE))
    def test_against_oracle(self, eps):
        assert d_functional(KernelSpec(eps)) == pytest.approx(D_ORACLE[eps], abs=1e-6)

    def test_full_domain_agrees(self):
        k = KernelSpec(0.25)
        assert d_functional(k, domain="full") == pytest.approx(d_functional(k), abs=1e-6)

    def test_bad_domain(self):
        with pytest.raises(InvalidParameter):
            d_functional(KernelSpec(0.25), domain="half")

    @pytest.mark.parametrize("eps", np.round(np.arange(0.05, 0.501, 0.05), 10))
    def test_dominated_by_easy_bound(self, eps):
        assert d_functional(KernelSpec(eps)) <= d_functional_upper(eps) + 1e-8

    def test_window_variance_clip_logs(self, caplog, monkeypatch):
        k = KernelSpec(0.25)
        monkeypatch.setattr(KernelSpec, "window_variance_prime", lambda self, t: np.array([-1e-6, 0.5]))
        with caplog.at_level(logging.WARNING, logger="empgauss.bounds"):
            v = window_variance(k, np.zeros(2))
        np.testing.assert_array_equal(v, [0.0, 0.5])
        assert "negative window variance" in caplog.text

    def test_window_variance_nonnegative(self):
        t = np.linspace(-1, 2, 3001)
        assert np.all(window_variance(KernelSpec(0.1), t) >= 0)


class TestFormulas:
    def test_ecdf_bound_iid_thousand(self):
        assert theorem2_bound(1000, 0) == pytest.approx(1.6, rel=1e-14)

    def test_ecdf_bound_fully_correlated(self):
        assert theorem2_bound(100, 100 * 99) == pytest.approx(16.0, rel=1e-14)

    def test_smoothed_bound(self):
        assert LEMMA1_CONSTANT == pytest.approx(4.181540550352055, rel=1e-15)
        assert lemma1_bound(100, 0, 2.0) == pytest.approx(LEMMA1_CONSTANT * 0.2, rel=1e-14)

    def test_epsilon_star_value(self):
        eps, regime = epsilon_star(1000, 0)
        assert regime == "small_ratio"
        assert eps == pytest.approx((9 / 4000) ** (1 / 3), rel=1e-14)
        assert eps == pytest.approx(0.131037, abs=1e-6)

    def test_saturated(self):
        assert epsilon_star(10, 0) == (None, "saturated")
        rep = bound_report(10, 0)
        assert rep.epsilon == SATURATED_EPSILON and rep.regime == "saturated"

    def test_threshold_boundary(self):
        # (n + Δ)/n² = 1/18 exactly at n = 18, Δ = 0
        eps, regime = epsilon_star(18, 0)
        assert regime == "small_ratio" and eps == pytest.approx(0.5)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidParameter):
            theorem2_bound(0, 0)
        with pytest.raises(InvalidParameter):
            theorem2_bound(10, -1)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(18, 10 ** 7), st.floats(0, 1e3))
    def test_epsilon_star_minimizes_combined(self, n, mult):
        delta = min(mult * n, float(n) * (n - 1))
        eps, regime = epsilon_star(n, delta)
        if regime != "small_ratio":
            return
        best = combined_bound(n, delta, eps)
        for e in np.linspace(0.01, 0.5, 50):
            assert best <= combined_bound(n, delta, e) + 1e-12
        # optimized value is 15.72...·∛ratio, under the rounded constant 16
        assert best <= theorem2_bound(n, delta)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 10 ** 6), st.floats(0, 1e6), st.floats(0, 1e6))
    def test_monotone_in_delta(self, n, a, b):
        lo, hi = sorted((a, b))
        assert theorem2_bound(n, lo) <= theorem2_bound(n, hi)


class TestReport:
    def test_iid_thousand(self):
        rep = bound_report(1000, 0)
        assert rep.epsilon == pytest.approx(0.131037, abs=1e-6)
        assert rep.theorem2_value == pytest.approx(1.6)
        assert rep.d_ell <= rep.d_ell_bound
        assert rep.lemma1_value == pytest.approx(LEMMA1_CONSTANT * rep.d_ell * math.sqrt(1e-3))
        assert set(rep.as_dict()) >= {"n", "delta", "epsilon", "regime", "lemma1_value", "theorem2_value"}

    def test_fixed_epsilon(self):
        rep = bound_report(1000, 500, epsilon=0.25)
        assert rep.epsilon == 0.25
        assert rep.d_ell == pytest.approx(D_ORACLE[0.25], abs=1e-6)
