import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from empgauss.covmodels import (
    FamilySpec,
    as_condition_partial_sums,
    block_size_for_delta,
    block_spec_for_delta,
    build_explicit,
    build_family,
    dependence_measure,
    growth_diagnostics,
    load_matrix_csv,
    lrd_delta_constant,
    ou_delta_limit,
    save_matrix_csv,
)
from empgauss.errors import (
    BlockExceedsDimension,
    InvalidParameter,
    NotPositiveSemidefinite,
    NotSymmetric,
    NotUnitDiagonal,
)


def brute_delta(c):
    c = np.asarray(c)
    return float(np.abs(c).sum() - np.abs(np.diag(c)).sum())


def random_correlation(rng, n, rank=None):
    a = rng.standard_normal((n, rank or n))
    c = a @ a.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


class TestDependenceMeasure:
    def test_identity_has_zero_delta(self):
        assert dependence_measure(build_explicit(np.eye(5))) == 0.0

    def test_all_ones(self):
        assert dependence_measure(build_explicit(np.ones((3, 3)))) == 6.0

    def test_two_by_two(self):
        assert dependence_measure(build_explicit([[1, -0.3], [-0.3, 1]])) == pytest.approx(0.6, abs=1e-15)

    def test_ou_three(self):
        # 2(2e^{-1} + e^{-2}) by direct expansion of the 3x3 Toeplitz matrix
        expected = 4 * math.exp(-1) + 2 * math.exp(-2)
        assert FamilySpec.ou(1.0).delta(3) == pytest.approx(expected, rel=1e-14)
        assert dependence_measure(build_family(FamilySpec.ou(1.0), 3)) == pytest.approx(expected, rel=1e-14)

    def test_unshifted_power_law_sum(self):
        # 2(3·1 + 2·2^{-1/2} + 1·3^{-1/2})
        assert FamilySpec.lrd(0.5, shift=0.0).delta(4) == pytest.approx(9.983128, abs=1e-6)

    @pytest.mark.parametrize("spec", [
        FamilySpec.ou(0.3), FamilySpec.lrd(0.4), FamilySpec.equicorrelated(0.2),
        FamilySpec.block_identical(7, 0.1), FamilySpec.iid(),
    ])
    def test_growth_curve_matches_dense_sum(self, spec):
        for n in (1, 2, 10, 57):
            if spec.family == "block_identical" and n < 7:
                continue
            model = build_family(spec, n)
            assert spec.delta(n) == pytest.approx(brute_delta(model.entries), rel=1e-12, abs=1e-12)

    def test_ou_closed_form_matches_summation(self):
        from empgauss.covmodels import _ou_delta_closed
        for n in (2, 3, 100, 12345):
            assert _ou_delta_closed(n, 0.7) == pytest.approx(FamilySpec.ou(0.7).delta(n), rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2 ** 32 - 1))
    def test_explicit_delta_is_offdiagonal_abs_sum(self, n, seed):
        c = random_correlation(np.random.default_rng(seed), n)
        model = build_explicit(c)
        assert dependence_measure(model) == pytest.approx(brute_delta(c), rel=1e-12)
        assert dependence_measure(model) >= 0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 5.0), st.integers(2, 400))
    def test_ou_delta_bounded_by_linear_limit(self, alpha, n):
        assert FamilySpec.ou(alpha).delta(n) <= n * ou_delta_limit(alpha) * (1 + 1e-12)


class TestValidation:
    def test_asymmetric(self):
        with pytest.raises(NotSymmetric):
            build_explicit([[1, 0.2], [0.3, 1]])

    def test_diagonal(self):
        with pytest.raises(NotUnitDiagonal):
            build_explicit([[1, 0], [0, 2]])

    def test_not_psd(self):
        with pytest.raises(NotPositiveSemidefinite):
            build_explicit([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])

    def test_rank_deficient_is_accepted(self):
        model = build_explicit(random_correlation(np.random.default_rng(1), 8, rank=2))
        assert model.min_eigenvalue > -1e-10

    def test_unshifted_power_law_is_indefinite(self):
        with pytest.raises(NotPositiveSemidefinite):
            build_family(FamilySpec.lrd(0.5, shift=0.0), 4)

    def test_shifted_power_law_is_psd(self):
        for n in (3, 50, 500):
            model = build_family(FamilySpec.lrd(0.5), n)
            assert model.min_eigenvalue > -1e-10

    @pytest.mark.parametrize("bad", [
        ("ou", {"alpha": 0}), ("lrd", {"D": 1.0}), ("lrd", {"D": 0.5, "shift": -1}),
        ("equicorrelated", {"rho": 1.0}), ("block_identical", {"m": 0, "xi": 0}),
        ("block_identical", {"m": 2.5, "xi": 0}), ("custom_stationary", {"r": [0.5, 0.1]}),
        ("nope", {}),
    ])
    def test_bad_parameters(self, bad):
        with pytest.raises(InvalidParameter):
            FamilySpec(*bad)

    def test_block_larger_than_n(self):
        with pytest.raises(InvalidParameter):
            build_family(FamilySpec.block_identical(10, 0.0), 5)

    def test_entries_read_only(self):
        model = build_family(FamilySpec.ou(1.0), 4)
        with pytest.raises(ValueError):
            model.entries[0, 1] = 0.0


class TestFamilies:
    def test_ou_entries(self):
        c = build_family(FamilySpec.ou(0.5), 4).entries
        assert c[0, 3] == pytest.approx(math.exp(-1.5), rel=1e-15)
        assert c[2, 1] == pytest.approx(math.exp(-0.5), rel=1e-15)

    def test_custom_stationary_array_and_callable(self):
        r = np.array([1.0, 0.5, 0.25])
        a = build_family(FamilySpec.custom_stationary(r), 3).entries
        b = build_family(FamilySpec.custom_stationary(lambda k: 0.5 ** k), 3).entries
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)

    def test_custom_array_too_short(self):
        with pytest.raises(InvalidParameter):
            FamilySpec.custom_stationary([1.0, 0.5]).delta(5)

    def test_label_and_roundtrip(self):
        spec = FamilySpec.ou(1.0)
        assert spec.label == "ou(alpha=1)"
        assert FamilySpec.from_dict(spec.to_dict()) == spec

    def test_large_structured_family_is_lazy(self):
        model = build_family(FamilySpec.ou(1.0), 50_000)
        assert not model.materialized
        assert model.delta == pytest.approx(FamilySpec.ou(1.0).delta(50_000))

    def test_csv_roundtrip(self, tmp_path):
        c = random_correlation(np.random.default_rng(3), 6)
        save_matrix_csv(tmp_path / "c.csv", c)
        model = load_matrix_csv(tmp_path / "c.csv")
        np.testing.assert_array_equal(model.entries, c)


class TestGrowth:
    @pytest.mark.criterion(11)
    def test_ou_linear_growth(self):
        for alpha in (1.0, 0.1):
            ratio = FamilySpec.ou(alpha).delta(10 ** 6) / 10 ** 6
            assert abs(ratio / ou_delta_limit(alpha) - 1) < 0.01

    @pytest.mark.criterion(11)
    def test_lrd_growth_constant(self):
        D = 0.5
        n = 10 ** 6
        ratio = FamilySpec.lrd(D).delta(n) / n ** (2 - D)
        assert lrd_delta_constant(D) == pytest.approx(8 / 3)
        assert abs(ratio / (8 / 3) - 1) < 0.05

    def test_growth_rows(self):
        rows = growth_diagnostics(FamilySpec.equicorrelated(0.5), [10, 100])
        assert rows[0].delta == 45.0
        assert rows[1].delta_over_n2 == pytest.approx(0.5 * 99 / 100)


class TestBlockConstruction:
    def test_block_size_example(self):
        assert block_size_for_delta(10 ** 4) == 100

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10 ** 7))
    def test_block_size_is_largest_fitting(self, delta):
        m = block_size_for_delta(delta)
        assert m * (m - 1) <= delta < (m + 1) * m

    @pytest.mark.parametrize("n,delta", [(1000, 1000.0), (1000, 4000.0), (500, 1234.5), (50, 50 * 49)])
    def test_spec_hits_target(self, n, delta):
        spec = block_spec_for_delta(n, delta)
        assert spec.delta(n) == pytest.approx(delta, rel=1e-10)
        model = build_family(spec, n)
        assert brute_delta(model.entries) == pytest.approx(delta, rel=1e-10)

    def test_exceeds_dimension(self):
        with pytest.raises(BlockExceedsDimension):
            block_spec_for_delta(10, 1000.0)


class TestPartialSums:
    def test_iid_zero(self):
        np.testing.assert_array_equal(as_condition_partial_sums(FamilySpec.iid(), 2.0, 20), np.zeros(20))

    def test_quadratic_growth_diverges_linearly(self):
        s = as_condition_partial_sums(lambda n: float(n) ** 2, 2.0, 20)
        np.testing.assert_allclose(s, np.arange(1, 21), rtol=0, atol=1e-12)

    def test_ou_increments(self):
        s = as_condition_partial_sums(FamilySpec.ou(1.0), 2.0, 20)
        inc = np.diff(s, prepend=0.0)
        for i in (5, 10, 20):
            n = 2 ** i
            assert inc[i - 1] == pytest.approx((FamilySpec.ou(1.0).delta(n) / n ** 2) ** (1 / 3), rel=1e-12)
        assert np.all(inc[1:] < inc[:-1])

    def test_nondecreasing(self):
        s = as_condition_partial_sums(FamilySpec.lrd(0.5), 1.5, 25)
        assert np.all(np.diff(s) >= 0)

    def test_bad_gamma(self):
        with pytest.raises(InvalidParameter):
            as_condition_partial_sums(FamilySpec.iid(), 1.0, 5)
