"""Cross-validated lagged linear decoding and reconstruction scoring."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import pca, sfa
from .core import as_series, mean_center
from .covariance import estimate_crosscov
from .errors import DyncompError, InvalidArgumentError
from .optim import FitOptions, fit_dca
from .synth import LorenzParams, NoiseSpec, embed_noisy, lorenz_generate

logger = logging.getLogger(__name__)

TARGETS = ("auxiliary", "self_forecast")


@dataclass(frozen=True)
class EvalSpec:
    n_folds: int = 5
    history_bins: int = 3
    lag_bins: int = 0
    ridge_alpha: float = 0.0
    target: str = "auxiliary"
    segment_length: Optional[int] = None

    def __post_init__(self):
        if self.n_folds < 2:
            raise InvalidArgumentError(f"n_folds must be >= 2, got {self.n_folds}")
        if self.history_bins < 1:
            raise InvalidArgumentError(f"history_bins must be >= 1, got {self.history_bins}")
        if self.lag_bins < 0:
            raise InvalidArgumentError(f"lag_bins must be >= 0, got {self.lag_bins}")
        if self.ridge_alpha < 0:
            raise InvalidArgumentError(f"ridge_alpha must be >= 0, got {self.ridge_alpha}")
        if self.target not in TARGETS:
            raise InvalidArgumentError(f"target must be one of {TARGETS}, got {self.target!r}")


@dataclass
class EvalResult:
    fold_r2: np.ndarray
    train_r2: np.ndarray
    fold_sizes: np.ndarray
    test_indices: list = field(repr=False, default_factory=list)

    @property
    def mean_r2(self):
        return float(np.mean(self.fold_r2))


def fit_linear(X, Y, alpha=0.0):
    """Least squares (ridge if ``alpha > 0``) with an unpenalized intercept.

    Returns ``(coef, intercept)`` with ``Y ~ X @ coef + intercept``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    xm, ym = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - xm, Y - ym
    if alpha > 0:
        coef = np.linalg.solve(Xc.T @ Xc + alpha * np.eye(X.shape[1]), Xc.T @ Yc)
    else:
        if np.linalg.matrix_rank(Xc) < X.shape[1]:
            raise InvalidArgumentError(
                "design matrix is singular; set ridge_alpha > 0")
        coef = np.linalg.lstsq(Xc, Yc, rcond=None)[0]
    return coef, ym - xm @ coef


def r2_score(Y, Y_hat, Y_ref_mean=None):
    """Pooled multivariate ``1 - SSE / SST``; SST is taken about ``Y_ref_mean``."""
    Y = np.asarray(Y, dtype=np.float64)
    mean = Y.mean(axis=0) if Y_ref_mean is None else Y_ref_mean
    sst = np.sum((Y - mean) ** 2)
    return 1.0 - np.sum((Y - Y_hat) ** 2) / sst


def lagged_design(features, history, lag):
    """Rows ``[y_{t-h+1}, ..., y_t]`` for t = h-1 .. T_tot-1-lag; returns (X, t)."""
    Y = np.asarray(features, dtype=np.float64)
    T_tot = Y.shape[0]
    t = np.arange(history - 1, T_tot - lag)
    X = np.hstack([Y[t - history + 1 + j] for j in range(history)])
    return X, t


def fold_assignment(T_tot, n_folds):
    """Contiguous fold label for every time index."""
    labels = np.empty(T_tot, dtype=int)
    for k, block in enumerate(np.array_split(np.arange(T_tot), n_folds)):
        labels[block] = k
    return labels


def lagged_regression_eval(features, targets, spec: EvalSpec = EvalSpec()) -> EvalResult:
    """k-fold decoding of ``targets[t + lag]`` from ``history`` bins of features.

    Folds are contiguous time blocks; samples whose window crosses a fold or
    segment boundary are dropped from both training and testing.
    """
    F = as_series(features).data
    G = as_series(targets).data
    if F.shape[0] != G.shape[0]:
        raise InvalidArgumentError(
            f"features have {F.shape[0]} steps, targets {G.shape[0]}")
    h, lag = spec.history_bins, spec.lag_bins
    T_tot = F.shape[0]
    if T_tot - lag - h + 1 < spec.n_folds * 2:
        raise InvalidArgumentError("too few samples for the requested folds, history and lag")
    X, t = lagged_design(F, h, lag)
    Yt = G[t + lag]
    folds = fold_assignment(T_tot, spec.n_folds)
    ok = folds[t - h + 1] == folds[t + lag]
    if spec.segment_length:
        seg = np.arange(T_tot) // int(spec.segment_length)
        ok &= seg[t - h + 1] == seg[t + lag]
    sample_fold = np.where(ok, folds[t], -1)
    n_params = X.shape[1] + 1
    fold_r2, train_r2, sizes, test_idx = [], [], [], []
    for k in range(spec.n_folds):
        train = sample_fold >= 0
        train &= sample_fold != k
        test = sample_fold == k
        if train.sum() < 10 * n_params:
            logger.warning("fold %d: %d training samples for %d parameters",
                           k, int(train.sum()), n_params)
        if test.sum() == 0:
            raise InvalidArgumentError(f"fold {k} has no usable test samples")
        coef, icpt = fit_linear(X[train], Yt[train], spec.ridge_alpha)
        train_mean = Yt[train].mean(axis=0)
        fold_r2.append(r2_score(Yt[test], X[test] @ coef + icpt, train_mean))
        train_r2.append(r2_score(Yt[train], X[train] @ coef + icpt, train_mean))
        sizes.append(int(test.sum()))
        test_idx.append(t[test])
    return EvalResult(np.array(fold_r2), np.array(train_r2), np.array(sizes), test_idx)


def reconstruction_r2(latent_true, latent_est) -> float:
    """R^2 of the best affine map from an estimated latent to the true one."""
    A = as_series(latent_true).data
    B = as_series(latent_est).data
    if A.shape[0] != B.shape[0]:
        raise InvalidArgumentError(f"lengths differ: {A.shape[0]} vs {B.shape[0]}")
    if np.all(B.std(axis=0) == 0):
        logger.warning("reconstruction_r2: estimate has zero variance")
        return 0.0
    X = np.hstack([B, np.ones((B.shape[0], 1))])
    coef = np.linalg.lstsq(X, A, rcond=None)[0]
    return float(r2_score(A, X @ coef))


@dataclass(frozen=True)
class SweepConfig:
    n_steps: int = 10000
    n: int = 30
    d: int = 3
    T: int = 4
    seeds: Sequence[int] = tuple(range(1, 11))
    d_noise: float = 7.0
    n_restarts: int = 5
    max_iter: int = 500
    lorenz: LorenzParams = LorenzParams()


def _fit_method(method, X, cfg, seed):
    if method == "dca":
        covs = estimate_crosscov(X, 2 * cfg.T)
        return fit_dca(covs, FitOptions(T=cfg.T, d=cfg.d, n_restarts=cfg.n_restarts,
                                        max_iter=cfg.max_iter, seed=seed)).projection
    covs = estimate_crosscov(X, 2)
    if method == "pca":
        return pca(covs[0], cfg.d)
    if method == "sfa":
        return sfa(covs[0], covs[1], cfg.d)
    raise InvalidArgumentError(f"unknown sweep method {method!r}")


def snr_sweep(snr_values, methods=("dca", "pca"), config: SweepConfig = SweepConfig()):
    """Reconstruction R^2 of the Lorenz latent for each (snr, seed, method).

    Returns a list of row dicts with keys ``snr, seed, method, r2, error``.
    Failures are recorded in ``error`` rather than aborting the sweep.
    """
    if not len(snr_values) or not len(methods):
        raise InvalidArgumentError("snr_values and methods must be nonempty")
    rows = []
    for seed in config.seeds:
        latent = lorenz_generate(config.lorenz, config.n_steps, seed=seed)
        for snr in snr_values:
            X, _ = embed_noisy(latent, config.n, NoiseSpec(1.0, config.d_noise, seed),
                               snr=snr, seed=seed)
            X = mean_center(X)
            for method in methods:
                row = {"snr": float(snr), "seed": int(seed), "method": method,
                       "r2": float("nan"), "error": ""}
                try:
                    proj = _fit_method(method, X, config, seed)
                    row["r2"] = reconstruction_r2(latent, X.data @ proj.matrix)
                except DyncompError as exc:
                    row["error"] = f"{type(exc).__name__}: {exc}"
                rows.append(row)
    return rows


def summarize_sweep(rows):
    """Mean R^2 per (snr, method), skipping failed cells."""
    out = {}
    for r in rows:
        if r["error"]:
            continue
        out.setdefault((r["snr"], r["method"]), []).append(r["r2"])
    return {k: float(np.mean(v)) for k, v in sorted(out.items())}


