import numpy as np
import pytest
from numpy.testing import assert_allclose

from shrinklmm import (covariance_shrink, eb_estimate, error_variance,
                       js_estimate, jsl_estimate)


class TestZeroTargetEstimate:
    def test_hand_example(self):
        res = js_estimate([2, 0, 0, 0], 1.0)
        assert res.shrink_factor == pytest.approx(0.5, abs=1e-15)
        assert_allclose(res.estimate, [1, 0, 0, 0], atol=1e-15)
        assert not res.degenerate

    def test_zero_noise_identity(self):
        res = js_estimate([1, 2, 3], 0.0)
        assert res.shrink_factor == 1.0
        assert_allclose(res.estimate, [1, 2, 3])

    def test_zero_norm_degenerate(self):
        res = js_estimate([0, 0, 0], 1.0)
        assert res.degenerate
        assert_allclose(res.estimate, [0, 0, 0])

    def test_requires_three_components(self):
        with pytest.raises(ValueError, match="t >= 3"):
            js_estimate([1, 2], 1.0)

    def test_negative_factor_reported_raw(self):
        res = js_estimate([0.1, 0.1, 0.1], 10.0)
        assert res.shrink_factor < 0
        clamped = js_estimate([0.1, 0.1, 0.1], 10.0, positive_part=True)
        assert clamped.shrink_factor == 0.0

    def test_scale_equivariance(self, rng):
        for _ in range(20):
            y = rng.normal(size=rng.integers(3, 12))
            v = float(rng.uniform(0.1, 3.0))
            c = float(rng.uniform(0.2, 5.0)) * rng.choice([-1, 1])
            a = js_estimate(c * y, c * c * v).estimate
            b = c * js_estimate(y, v).estimate
            assert_allclose(a, b, rtol=1e-12, atol=1e-12)


class TestGrandMeanEstimate:
    def test_hand_example(self):
        res = jsl_estimate([1, 2, 3, 4, 5], 1.0)
        assert res.shrink_factor == pytest.approx(0.8, abs=1e-15)
        assert_allclose(res.estimate, [1.4, 2.2, 3.0, 3.8, 4.6], atol=1e-12)

    def test_constant_vector_degenerate(self):
        for c in (0.0, -3.5, 7.0):
            res = jsl_estimate([c] * 4, 1.0)
            assert res.degenerate
            assert_allclose(res.estimate, [c] * 4)

    def test_zero_noise_identity(self):
        res = jsl_estimate([1, 2, 3, 4, 5], 0.0)
        assert_allclose(res.estimate, [1, 2, 3, 4, 5])

    def test_requires_four_components(self):
        with pytest.raises(ValueError, match="t >= 4"):
            jsl_estimate([1, 2, 3], 1.0)

    def test_translation_equivariance(self, rng):
        for _ in range(20):
            y = rng.normal(size=rng.integers(4, 12))
            v = float(rng.uniform(0.1, 3.0))
            c = float(rng.normal())
            base = jsl_estimate(y, v)
            shifted = jsl_estimate(y + c, v)
            assert shifted.shrink_factor == pytest.approx(base.shrink_factor,
                                                          rel=1e-12)
            assert_allclose(shifted.estimate, base.estimate + c,
                            rtol=1e-12, atol=1e-12)


class TestCovarianceShrink:
    def test_matches_grand_mean_arithmetic(self):
        res = covariance_shrink([1, 2, 3, 4, 5], 1.0)
        assert_allclose(res.estimate, [1.4, 2.2, 3.0, 3.8, 4.6], atol=1e-12)

    def test_vanishing_a_limit(self):
        y = np.array([1.0, 2, 3, 4, 5])
        res = covariance_shrink(y, 1e-12)
        assert np.max(np.abs(res.estimate - y)) < 1e-10

    def test_constant_degenerate(self):
        res = covariance_shrink([2.0] * 5, 1.0)
        assert res.degenerate
        assert_allclose(res.estimate, [2.0] * 5)

    def test_positive_a_required(self):
        with pytest.raises(ValueError):
            covariance_shrink([1, 2, 3, 4], 0.0)

    def test_translation_equivariance(self, rng):
        y = rng.normal(size=8)
        res = covariance_shrink(y, 0.7)
        res2 = covariance_shrink(y + 4.2, 0.7)
        assert res2.shrink_factor == pytest.approx(res.shrink_factor, rel=1e-12)
        assert_allclose(res2.estimate, res.estimate + 4.2, rtol=1e-12, atol=1e-12)


class TestAffineStructure:
    def test_estimate_parallel_to_deviation(self, rng):
        for _ in range(30):
            y = rng.normal(scale=2.0, size=rng.integers(4, 10))
            v = float(rng.uniform(0.0, 2.0))
            for res in (js_estimate(y, v), jsl_estimate(y, v)):
                lhs = res.estimate - res.target
                rhs = res.shrink_factor * (y - res.target)
                assert_allclose(lhs, rhs, atol=1e-12)


class TestErrorVariance:
    def test_within_rows(self):
        assert error_variance([[0, 2], [1, 3]], "within_rows") == pytest.approx(2.0)

    def test_interaction_additive_table(self):
        assert error_variance([[1, 2], [3, 4]], "interaction") == pytest.approx(0.0)

    def test_interaction_half_residuals(self):
        assert error_variance([[1, 2], [4, 3]], "interaction") == pytest.approx(1.0)

    def test_incomplete_rejected(self):
        with pytest.raises(ValueError, match="incomplete"):
            error_variance([[1.0, np.nan], [2.0, 3.0]], "within_rows")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            error_variance([[1, 2], [3, 4]], "nope")


class TestEmpiricalBayes:
    def test_no_noise_identity(self):
        # two identical columns, no within-row spread
        Y = np.array([[2.0, 2.0], [0, 0], [0, 0], [0, 0]])
        res = eb_estimate(Y, "zero")
        assert res.shrink_factor == 1.0
        assert_allclose(res.estimate, [2, 0, 0, 0])

    def test_moment_divisor_contrast(self):
        # ybar = (1,1,1,1), sigma2e/n = 1, S0 = 4: the moment rule uses
        # S0/t and lands exactly on zero shrinkage weight
        Y = np.array([[0.0, 2.0]] * 4)
        res = eb_estimate(Y, "zero")
        assert res.shrink_factor == pytest.approx(0.0, abs=1e-14)
        closed = js_estimate(Y.mean(axis=1), 1.0)
        assert closed.shrink_factor == pytest.approx(0.5, abs=1e-14)

    def test_grand_mean_divisor_relation(self):
        Y = np.array([[1.0, 3], [2, 4], [6, 8], [5, 9]])
        t, n = Y.shape
        s2 = error_variance(Y, "within_rows")
        res_eb = eb_estimate(Y, "grand_mean")
        res_jsl = jsl_estimate(Y.mean(axis=1), s2 / n)
        # both subtract v/S scaled by their divisor, so the complements
        # stand in the ratio (t-1)/(t-3)
        ratio = (1 - res_eb.shrink_factor) / (1 - res_jsl.shrink_factor)
        assert ratio == pytest.approx((t - 1) / (t - 3), rel=1e-12)

    def test_constant_rows_degenerate(self):
        Y = np.array([[1.0, 2.0]] * 5)
        res = eb_estimate(Y, "grand_mean")
        assert res.degenerate
