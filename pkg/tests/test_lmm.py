import numpy as np
import pytest
from numpy.testing import assert_allclose

from shrinklmm import (DisconnectedDesignError, FitResult, ModelSpec,
                       ObservationTable, VarianceComponents, VariancePrior,
                       balanced_oneway_reml, blup_closed_form, gls_estimate,
                       map_fit, reml_fit, restricted_loglik)
from conftest import balanced_table

ONEWAY = ModelSpec(("u",))


def dense_covariance(table, spec, theta):
    """Independent oracle: V assembled explicitly from signed indicators."""
    n = table.n_obs
    V = theta.sigma2_e * np.eye(n)
    Z = {}
    for name in spec.random_factors:
        levels = table.levels(name)
        idx = {l: i for i, l in enumerate(levels)}
        Zk = np.zeros((n, len(levels)))
        for row, lab in enumerate(table.factors[name]):
            Zk[row, idx[lab]] = spec.signs[name]
        V += theta.sigma2[name] * Zk @ Zk.T
        Z[name] = (levels, Zk)
    return V, Z


def dense_reml(table, spec, theta):
    V, _ = dense_covariance(table, spec, theta)
    y = table.responses
    X = np.ones((table.n_obs, 1))
    Vi = np.linalg.inv(V)
    XtViX = X.T @ Vi @ X
    beta = np.linalg.solve(XtViX, X.T @ Vi @ y)
    r = y - X @ beta
    _, ld_v = np.linalg.slogdet(V)
    _, ld_x = np.linalg.slogdet(XtViX)
    return -0.5 * (ld_v + ld_x + float(r @ Vi @ y))


class TestRestrictedLoglik:
    def test_single_observation_convention(self):
        table = ObservationTable(np.array([0.0]), {})
        val = restricted_loglik(table, ModelSpec(()), VarianceComponents(1.0, {}))
        assert val == pytest.approx(0.0, abs=1e-14)

    def test_matches_dense_oracle(self, rng):
        for _ in range(10):
            n = 30
            home = rng.integers(0, 5, n)
            away = rng.integers(0, 5, n)
            y = rng.normal(size=n)
            table = ObservationTable(y, {"h": home, "a": away})
            spec = ModelSpec(("h", "a"), {"h": 1, "a": -1})
            theta = VarianceComponents(float(rng.uniform(0.3, 2)),
                                       {"h": float(rng.uniform(0, 2)),
                                        "a": float(rng.uniform(0, 2))})
            assert restricted_loglik(table, spec, theta) == pytest.approx(
                dense_reml(table, spec, theta), abs=1e-9)

    def test_translation_invariance(self, rng):
        y = rng.normal(size=24)
        g = rng.integers(0, 4, 24)
        theta = VarianceComponents(1.3, {"u": 0.7})
        t1 = ObservationTable(y, {"u": g})
        t2 = ObservationTable(y + 17.5, {"u": g})
        assert restricted_loglik(t1, ONEWAY, theta) == pytest.approx(
            restricted_loglik(t2, ONEWAY, theta), abs=1e-8)

    def test_row_reordering_invariance(self, rng):
        y = rng.normal(size=24)
        g = rng.integers(0, 4, 24)
        perm = rng.permutation(24)
        theta = VarianceComponents(0.8, {"u": 0.5})
        v1 = restricted_loglik(ObservationTable(y, {"u": g}), ONEWAY, theta)
        v2 = restricted_loglik(ObservationTable(y[perm], {"u": g[perm]}),
                               ONEWAY, theta)
        assert v1 == pytest.approx(v2, abs=1e-12)

    def test_requires_positive_residual_variance(self):
        table = ObservationTable(np.array([1.0, 2.0]), {"u": [0, 1]})
        with pytest.raises(ValueError):
            restricted_loglik(table, ONEWAY, VarianceComponents(0.0, {"u": 1.0}))


class TestBalancedOneway:
    def test_hand_example(self):
        mu, s2e, s2u = balanced_oneway_reml([[1, 3], [2, 4], [6, 8]])
        assert (mu, s2e, s2u) == (4.0, 2.0, 6.0)

    def test_no_within_noise(self):
        mu, s2e, s2u = balanced_oneway_reml([[1, 1], [2, 2], [3, 3]])
        assert s2e == 0.0
        assert s2u == pytest.approx(1.0)  # variance of the row means

    def test_truncation_case(self):
        mu, s2e, s2u = balanced_oneway_reml([[0, 2], [1, 1], [2, 0]])
        assert s2u == 0.0
        # boundary profile optimum: total SS about the grand mean over tn-1
        assert s2e == pytest.approx(0.8)


class TestRemlFit:
    def test_matches_closed_form_oneway(self):
        fit = reml_fit(balanced_table([[1, 3], [2, 4], [6, 8]]), ONEWAY)
        assert fit.converged
        assert fit.mu_hat == pytest.approx(4.0, abs=1e-9)
        assert fit.components.sigma2_e == pytest.approx(2.0, abs=1e-8)
        assert fit.components.sigma2["u"] == pytest.approx(6.0, abs=1e-8)
        assert fit.mu_hat + fit.effects["u"][0] == pytest.approx(16 / 7, abs=1e-8)

    def test_complete_blocks_intercept_is_grand_mean(self, rng):
        t, n = 6, 4
        y = (rng.normal(0, 1, (t, n)) + rng.normal(0, 2, (1, n))
             + rng.normal(0, 1.5, (t, 1))).ravel()
        treat = np.repeat(np.arange(t), n)
        block = np.tile(np.arange(n), t)
        table = ObservationTable(y, {"treatment": treat, "block": block})
        fit = reml_fit(table, ModelSpec(("treatment", "block")))
        assert fit.mu_hat == pytest.approx(float(y.mean()), abs=1e-9)

    def test_zero_league_all_floored(self):
        n = 12
        home = np.arange(n) % 4
        away = (np.arange(n) + 1 + (np.arange(n) // 4)) % 4
        table = ObservationTable(np.zeros(n), {"home": home, "away": away})
        fit = reml_fit(table, ModelSpec(("home", "away"), {"away": -1}))
        assert fit.converged
        assert set(fit.floored) == {"e", "home", "away"}
        for eff in fit.effects.values():
            assert all(v == 0.0 for v in eff.values())

    def test_normal_equations_at_optimum(self, rng):
        # fitted effects must equal G Z' V^-1 (y - X mu) with V assembled
        # independently of the fitting code path
        n = 40
        home = rng.integers(0, 5, n)
        away = rng.integers(0, 5, n)
        y = (1.2 * rng.standard_normal(5)[home]
             - 0.9 * rng.standard_normal(5)[away]
             + rng.normal(0, 1, n) + 0.3)
        table = ObservationTable(y, {"home": home, "away": away})
        spec = ModelSpec(("home", "away"), {"home": 1, "away": -1})
        fit = reml_fit(table, spec)
        V, Z = dense_covariance(table, spec, fit.components)
        Vi = np.linalg.inv(V)
        X = np.ones((n, 1))
        beta = np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y).item()
        assert beta == pytest.approx(fit.mu_hat, abs=1e-8)
        r = y - beta
        for name in spec.random_factors:
            levels, Zk = Z[name]
            u = fit.components.sigma2[name] * Zk.T @ Vi @ r
            fitted = np.array([fit.effects[name][l] for l in levels])
            assert_allclose(fitted, u, atol=1e-8)

    def test_stationarity_of_fitted_components(self, rng):
        # central-difference gradient of the criterion at the optimum
        for trial in range(5):
            t, n = 6, 5
            y = (rng.normal(0, 1.4, (t, 1)) + rng.normal(0, 1, (t, n))).ravel()
            table = ObservationTable(y, {"u": np.repeat(np.arange(t), n)})
            fit = reml_fit(table, ONEWAY)
            if fit.floored:
                continue
            theta = np.array([fit.components.sigma2_e, fit.components.sigma2["u"]])
            grad = []
            for i in range(2):
                h = 1e-5 * theta[i]
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                f = [restricted_loglik(
                    table, ONEWAY, VarianceComponents(v[0], {"u": v[1]}))
                    for v in (tp, tm)]
                grad.append((f[0] - f[1]) / (2 * h))
            assert np.linalg.norm(grad) < 1e-4

    def test_row_permutation_invariance(self, rng):
        n = 30
        g = rng.integers(0, 5, n)
        y = rng.standard_normal(5)[g] + rng.normal(0, 1, n)
        perm = rng.permutation(n)
        f1 = reml_fit(ObservationTable(y, {"u": g}), ONEWAY)
        f2 = reml_fit(ObservationTable(y[perm], {"u": g[perm]}), ONEWAY)
        assert f1.mu_hat == pytest.approx(f2.mu_hat, abs=1e-12)
        assert f1.components.sigma2_e == pytest.approx(
            f2.components.sigma2_e, abs=1e-12)
        assert f1.components.sigma2["u"] == pytest.approx(
            f2.components.sigma2["u"], abs=1e-12)

    def test_needs_two_levels(self):
        table = ObservationTable(np.array([1.0, 2.0]), {"u": [0, 0]})
        with pytest.raises(ValueError, match="2 distinct levels"):
            reml_fit(table, ONEWAY)


class TestMapFit:
    def test_flat_prior_equals_reml_bit_for_bit(self):
        table = balanced_table([[1, 3], [2, 4], [6, 8]])
        fit_r = reml_fit(table, ONEWAY)
        fit_m = map_fit(table, ONEWAY, VariancePrior({"e": None, "u": None}))
        assert fit_m.mu_hat == fit_r.mu_hat
        assert fit_m.components.sigma2_e == fit_r.components.sigma2_e
        assert fit_m.components.sigma2 == fit_r.components.sigma2
        assert fit_m.criterion == fit_r.criterion
        assert fit_m.effects == fit_r.effects

    def test_pure_prior_mode_with_uninformative_data(self):
        # a single observation carries no information about the residual
        # variance, so the fitted value is exactly the prior mode
        table = ObservationTable(np.array([0.0]), {})
        d, X = 2.0, 1.0
        prior = VariancePrior({"e": (d / 2, d * X / 2)})
        fit = map_fit(table, ModelSpec(()), prior)
        assert fit.components.sigma2_e == pytest.approx(d * X / (d + 2),
                                                        abs=1e-10)

    def test_posterior_mode_blends_data_and_prior(self, rng):
        # intercept + residual model has a closed-form penalized optimum
        y = rng.normal(2.0, 1.0, 12)
        sse = float(((y - y.mean()) ** 2).sum())
        n = len(y)
        reml_est = sse / (n - 1)
        table = ObservationTable(y, {})
        prev = None
        for d in (2.0, 8.0, 32.0, 341.0):
            X = 0.25
            fit = map_fit(table, ModelSpec(()),
                          VariancePrior({"e": (d / 2, d * X / 2)}))
            expected = (sse + d * X) / (n - 1 + d + 2)
            assert fit.components.sigma2_e == pytest.approx(expected, rel=1e-8)
            prior_mode = d * X / (d + 2)
            lo, hi = sorted((reml_est, prior_mode))
            assert lo - 1e-9 <= fit.components.sigma2_e <= hi + 1e-9
            if prev is not None:  # growing d pulls the mode toward the prior
                assert abs(fit.components.sigma2_e - prior_mode) < abs(
                    prev - prior_mode) + 1e-12
            prev = fit.components.sigma2_e

    def test_concentrated_prior_dominates(self, rng):
        y = rng.normal(0, 1.0, 20)
        table = ObservationTable(y, {})
        target = 7.3
        alpha = 5e5
        prior = VariancePrior({"e": (alpha, (alpha + 1) * target)})
        fit = map_fit(table, ModelSpec(()), prior)
        assert fit.components.sigma2_e == pytest.approx(target, rel=0.01)

    def test_requires_prior(self):
        with pytest.raises(ValueError):
            map_fit(balanced_table([[1, 2], [3, 4]]), ONEWAY, None)


class TestBlupClosedForm:
    def test_hand_example(self):
        # shrinking toward 4 by 6/7 preserves the mean: (16+22+46)/21 = 4
        out = blup_closed_form([2, 3, 7], 4.0, 6.0, 1.0)
        assert_allclose(out, [16 / 7, 22 / 7, 46 / 7], atol=1e-12)

    def test_full_shrinkage(self):
        assert_allclose(blup_closed_form([2, 3, 7], 4.0, 0.0, 1.0), [4, 4, 4])

    def test_no_shrinkage(self):
        assert_allclose(blup_closed_form([2, 3, 7], 4.0, 6.0, 0.0), [2, 3, 7])

    def test_both_zero_returns_input(self):
        assert_allclose(blup_closed_form([2, 3, 7], 4.0, 0.0, 0.0), [2, 3, 7])


def bibd_table(responses):
    blocks = [[0, 1], [0, 2], [1, 2]]
    treat, blk, ys = [], [], []
    i = 0
    for j, members in enumerate(blocks):
        for tr in members:
            treat.append(tr)
            blk.append(j)
            ys.append(responses[i])
            i += 1
    return ObservationTable(np.array(ys), {"treatment": treat, "block": blk})


class TestGlsEstimate:
    def test_complete_blocks_reduce_to_treatment_means(self, rng):
        t, n = 4, 5
        y = rng.normal(0, 2, t * n)
        treat = np.tile(np.arange(t), n)
        blk = np.repeat(np.arange(n), t)
        table = ObservationTable(y, {"treatment": treat, "block": blk})
        levels, est = gls_estimate(table, 1.7, 3.1)
        means = [y[treat == i].mean() for i in range(t)]
        assert_allclose(est, means, atol=1e-10)

    def test_no_block_variance_gives_raw_means(self, rng):
        y = rng.normal(size=6)
        table = bibd_table(y)
        levels, est = gls_estimate(table, 1.0, 0.0)
        for i, lv in enumerate(levels):
            mask = np.array([tr == lv for tr in table.factors["treatment"]])
            assert est[i] == pytest.approx(float(table.responses[mask].mean()))

    def test_symmetric_zero_data(self):
        levels, est = gls_estimate(bibd_table(np.zeros(6)), 1.0, 1.0)
        assert_allclose(est, np.zeros(3), atol=1e-14)

    def test_matches_dense_oracle(self, rng):
        for _ in range(25):
            y = rng.normal(0, 1.5, 6)
            table = bibd_table(y)
            s2e = float(rng.uniform(0.5, 2.0))
            s2b = float(rng.uniform(0.0, 3.0))
            levels, est = gls_estimate(table, s2e, s2b)
            # brute force over the full 6-observation covariance
            blkarr = np.array([0, 0, 1, 1, 2, 2])
            trarr = np.array([0, 1, 0, 2, 1, 2])
            V = s2e * np.eye(6) + s2b * (blkarr[:, None] == blkarr[None, :])
            X = np.zeros((6, 3))
            X[np.arange(6), trarr] = 1.0
            Vi = np.linalg.inv(V)
            ref = np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y)
            assert_allclose(est, ref, atol=1e-10)

    def test_disconnected_design_named(self):
        table = ObservationTable(
            np.zeros(4),
            {"treatment": ["a", "b", "c", "d"], "block": [0, 0, 1, 1]})
        with pytest.raises(DisconnectedDesignError) as err:
            gls_estimate(table, 1.0, 1.0)
        msg = str(err.value)
        assert "a" in msg and "c" in msg


class TestSerialization:
    def test_table_csv_round_trip(self, tmp_path, rng):
        y = rng.normal(size=8)
        table = ObservationTable(y, {"home": [f"T{i%3}" for i in range(8)],
                                     "away": [f"T{(i+1)%3}" for i in range(8)]})
        path = tmp_path / "table.csv"
        table.to_csv(path)
        back = ObservationTable.from_csv(path)
        assert_allclose(back.responses, table.responses)
        assert list(back.factors["home"]) == list(table.factors["home"])

    def test_fit_json_round_trip(self):
        fit = reml_fit(balanced_table([[1, 3], [2, 4], [6, 8]]), ONEWAY)
        back = FitResult.from_json(fit.to_json())
        assert back.mu_hat == fit.mu_hat
        assert back.components.sigma2_e == fit.components.sigma2_e
        assert back.converged == fit.converged
        assert back.criterion == fit.criterion
