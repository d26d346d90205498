import logging

import numpy as np
import pytest

from dyncomp.errors import InvalidArgumentError
from dyncomp.evaluation import (EvalSpec, SweepConfig, fit_linear, fold_assignment,
                                lagged_design, lagged_regression_eval, reconstruction_r2,
                                snr_sweep, summarize_sweep)


class TestFitLinear:
    def test_normal_equations_oracle(self, rng):
        X = rng.standard_normal((50, 2))
        Y = X @ [[1.5], [-0.7]] + 0.3 + 0.1 * rng.standard_normal((50, 1))
        coef, icpt = fit_linear(X, Y)
        D = np.hstack([np.ones((50, 1)), X])
        beta = np.linalg.solve(D.T @ D, D.T @ Y)
        np.testing.assert_allclose(icpt, beta[0], atol=1e-8)
        np.testing.assert_allclose(coef, beta[1:], atol=1e-8)

    def test_ridge_shrinks(self, rng):
        X = rng.standard_normal((100, 3))
        Y = X @ np.ones((3, 1))
        c0, _ = fit_linear(X, Y)
        c1, _ = fit_linear(X, Y, alpha=100.0)
        assert np.linalg.norm(c1) < np.linalg.norm(c0)

    def test_singular_design_suggests_ridge(self, rng):
        x = rng.standard_normal((30, 1))
        with pytest.raises(InvalidArgumentError, match="ridge"):
            fit_linear(np.hstack([x, 2 * x]), x)
        fit_linear(np.hstack([x, 2 * x]), x, alpha=1e-3)


class TestLaggedRegression:
    def test_perfect_linear_target(self, rng):
        F = rng.standard_normal((2000, 3))
        G = F @ rng.standard_normal((3, 2))
        res = lagged_regression_eval(F, G, EvalSpec(history_bins=3))
        np.testing.assert_allclose(res.fold_r2, 1.0, atol=1e-10)

    def test_independent_target(self, rng):
        F = rng.standard_normal((10_000, 3))
        G = rng.standard_normal((10_000, 2))
        assert lagged_regression_eval(F, G).mean_r2 <= 0.02

    def test_lagged_forecast(self, rng):
        # target at t + 2 is a function of features at t
        F = rng.standard_normal((3000, 2))
        G = np.zeros((3000, 1))
        G[2:, 0] = F[:-2, 0] - F[:-2, 1]
        res = lagged_regression_eval(F, G, EvalSpec(history_bins=1, lag_bins=2))
        np.testing.assert_allclose(res.fold_r2, 1.0, atol=1e-10)

    def test_folds_partition_usable_samples(self, rng):
        T_tot, h, lag = 503, 3, 4
        F = rng.standard_normal((T_tot, 2))
        G = rng.standard_normal((T_tot, 1))
        res = lagged_regression_eval(F, G, EvalSpec(history_bins=h, lag_bins=lag))
        tested = np.concatenate(res.test_indices)
        assert tested.size == np.unique(tested).size
        _, t = lagged_design(F, h, lag)
        folds = fold_assignment(T_tot, 5)
        usable = t[folds[t - h + 1] == folds[t + lag]]
        np.testing.assert_array_equal(np.sort(tested), usable)

    def test_segment_boundaries_excluded(self, rng):
        F = rng.standard_normal((400, 1))
        res = lagged_regression_eval(F, F, EvalSpec(history_bins=2, segment_length=50))
        tested = np.concatenate(res.test_indices)
        # windows [t-1, t] crossing a multiple of 50 are dropped
        assert not np.any(tested % 50 == 0)

    def test_train_exceeds_test_on_average(self):
        gaps = []
        for seed in range(20):
            r = np.random.default_rng(seed)
            F = r.standard_normal((300, 4))
            G = F[:, :1] + r.standard_normal((300, 1))
            res = lagged_regression_eval(F, G)
            gaps.append(res.train_r2.mean() - res.mean_r2)
        assert np.mean(gaps) > 0

    def test_mixing_invariance(self, rng):
        F = rng.standard_normal((1000, 3))
        G = F[:, :2] @ [[1.0], [0.5]] + 0.5 * rng.standard_normal((1000, 1))
        A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        a = lagged_regression_eval(F, G).mean_r2
        b = lagged_regression_eval(F @ A, G).mean_r2
        assert abs(a - b) < 1e-8

    def test_length_mismatch(self, rng):
        with pytest.raises(InvalidArgumentError):
            lagged_regression_eval(rng.standard_normal((100, 2)), rng.standard_normal((99, 1)))

    def test_too_few_samples_warns(self, rng, caplog):
        F = rng.standard_normal((120, 4))
        with caplog.at_level(logging.WARNING):
            lagged_regression_eval(F, F[:, :1])
        assert "training samples" in caplog.text

    @pytest.mark.parametrize("kwargs", [dict(n_folds=1), dict(history_bins=0), dict(lag_bins=-1),
                                        dict(ridge_alpha=-1.0), dict(target="other")])
    def test_spec_validation(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            EvalSpec(**kwargs)


class TestReconstruction:
    def test_identity(self, rng):
        z = rng.standard_normal((500, 3))
        assert reconstruction_r2(z, z) == pytest.approx(1.0, abs=1e-12)

    def test_invertible_mixing(self, rng):
        z = rng.standard_normal((500, 3))
        A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        assert reconstruction_r2(z, z @ A + 2.0) == pytest.approx(1.0, abs=1e-12)

    def test_white_noise_is_chance(self, rng):
        z = rng.standard_normal((10_000, 3))
        assert reconstruction_r2(z, rng.standard_normal((10_000, 3))) < 0.05

    def test_zero_variance(self, rng, caplog):
        with caplog.at_level(logging.WARNING):
            assert reconstruction_r2(rng.standard_normal((50, 2)), np.ones((50, 2))) == 0.0
        assert "zero variance" in caplog.text


class TestSweep:
    def test_single_cell(self):
        rows = snr_sweep([1.0], ["dca"], SweepConfig(n_steps=2000, n=10, seeds=(1,), n_restarts=1))
        assert len(rows) == 1
        assert set(rows[0]) == {"snr", "seed", "method", "r2", "error"}
        assert rows[0]["error"] == ""

    def test_high_snr(self):
        cfg = SweepConfig(n_steps=3000, n=10, seeds=(1,), n_restarts=2)
        summary = summarize_sweep(snr_sweep([1e3], ["dca", "pca"], cfg))
        assert summary[(1e3, "dca")] > 0.9
        assert summary[(1e3, "pca")] > 0.9

    def test_errors_recorded_per_cell(self):
        rows = snr_sweep([1.0], ["pca", "dca"], SweepConfig(n_steps=2000, n=10, d=11, seeds=(1,)))
        assert all(r["error"] for r in rows)
        assert summarize_sweep(rows) == {}

    def test_empty_lists(self):
        with pytest.raises(InvalidArgumentError):
            snr_sweep([], ["pca"])
