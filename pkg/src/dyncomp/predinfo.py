"""Predictive information estimators.

Predictive information is the mutual information between consecutive
length-``T`` windows, ``I_T = 2 H(T) - H(2T)``. All values are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import welch
from scipy.signal.windows import hann
from scipy.spatial import cKDTree
from scipy.special import digamma, zeta

from . import _kernels
from .covariance import CrossCovSet, regularize_crosscov
from .errors import (ApproximationDomainError, DegenerateCovarianceError,
                     InvalidArgumentError, JitterRequiredError, SpectralFloorError)

ZETA3 = float(zeta(3))
METHODS = ("time_domain", "freq_domain", "analytic", "knn")


@dataclass(frozen=True)
class PIEstimate:
    value: float
    method: str
    T: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "method": self.method, "T": self.T,
                "diagnostics": self.diagnostics}


def cholesky_logdet(S):
    """Log-determinant of a symmetric positive definite matrix via Cholesky."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DegenerateCovarianceError(
            "covariance is not positive definite", _condition(S)) from None
    return 2.0 * np.log(np.diag(L)).sum()


def cholesky_logdet_inv(S):
    """Return ``(log det S, S^{-1})`` from one Cholesky factorization."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DegenerateCovarianceError(
            "covariance is not positive definite", _condition(S)) from None
    Linv = np.linalg.solve(L, np.eye(S.shape[0]))
    return 2.0 * np.log(np.diag(L)).sum(), Linv.T @ Linv


def _condition(S):
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    return float(w[-1] / w[0]) if w[0] > 0 else float("inf")


def _pi_from_lags(lags, T):
    big = _kernels.toeplitz(lags, 2 * T)
    m = T * lags.shape[1]
    return cholesky_logdet(big[:m, :m]) - 0.5 * cholesky_logdet(big)


def pi_time_domain(covs: CrossCovSet, T: int, regularize: bool = False) -> PIEstimate:
    """Gaussian predictive information ``log|Sigma_T| - 1/2 log|Sigma_2T|``.

    With ``regularize=True`` the diagonal of ``C_0`` is first loaded so the
    ``2T``-step covariance has smallest eigenvalue at least 1e-6.
    """
    T = int(T)
    if T < 1:
        raise InvalidArgumentError(f"T must be positive, got {T}")
    if covs.two_t < 2 * T:
        raise InvalidArgumentError(f"need {2 * T} lags, have {covs.two_t}")
    shift = 0.0
    if regularize:
        covs, shift = regularize_crosscov(covs, 2 * T)
    value = _pi_from_lags(covs.lags[: 2 * T], T)
    return PIEstimate(float(value), "time_domain", T, {"shift_applied": shift})


# ---------------------------------------------------------------------------
# Frequency domain (cepstrum)
# ---------------------------------------------------------------------------

def _nfft(T):
    # zero-padding keeps the windowed autocovariance (support |k| < 2T) free of
    # aliasing and keeps cepstral aliasing negligible
    return 1 << int(np.ceil(np.log2(16 * T)))


def _data_window(L, window_fn):
    if window_fn == "hann":
        return hann(L, sym=False)
    if window_fn == "none":
        return np.ones(L)
    raise InvalidArgumentError(f"window_fn must be 'hann' or 'none', got {window_fn!r}")


def lag_window(T, window_fn="hann"):
    """Normalized autocorrelation of the length-2T data window.

    Averaging windowed periodograms of length-2T segments estimates the
    spectrum of ``f(k) * lag_window[k]``.
    """
    w = _data_window(2 * T, window_fn)
    r = np.correlate(w, w, "full")[2 * T - 1:]
    return r / r[0]


def _clamp(S, clamp_nonpositive):
    bad = S <= 0
    if np.any(bad):
        if not clamp_nonpositive:
            raise SpectralFloorError(
                f"{int(bad.sum())} nonpositive spectral bin(s); add a white-noise floor")
        S = np.where(bad, 1e-12 * S.max(), S)
    return S, bad


def _cepstral_pi(S, T):
    c = np.fft.ifft(np.log(S)).real
    k = np.arange(1, 2 * T)
    b = c[1: 2 * T]
    return 0.5 * float(np.sum(k * b * b)), b


def _autocov_spectrum(f, T, window_fn):
    L = 2 * T
    M = _nfft(T)
    fw = np.asarray(f[:L], dtype=np.float64) * lag_window(T, window_fn)
    g = np.zeros(M)
    g[:L] = fw
    g[M - L + 1:] = fw[1:][::-1]
    return np.fft.fft(g).real


def freq_pi_autocov_grad(f, T, window_fn="hann", clamp_nonpositive=True):
    """Frequency-domain PI from an autocovariance and its gradient w.r.t. ``f``.

    Returns ``(value, grad)`` where ``grad[k] = d value / d f[k]`` for
    k = 0..2T-1.
    """
    L = 2 * T
    M = _nfft(T)
    S, bad = _clamp(_autocov_spectrum(f, T, window_fn), clamp_nonpositive)
    c = np.fft.ifft(np.log(S)).real
    k = np.arange(1, L)
    value = 0.5 * float(np.sum(k * c[1:L] ** 2))
    a = np.zeros(M)
    a[1:L] = k * c[1:L]
    d_logS = np.fft.fft(a).real / M
    d_S = np.where(bad, 0.0, d_logS / S)
    d_g = np.fft.fft(d_S).real
    d_fw = d_g[:L].copy()
    d_fw[1:] += d_g[M - L + 1:][::-1]
    return value, d_fw * lag_window(T, window_fn)


def pi_freq_domain(series_1d=None, T: int = 1, window_fn: str = "hann", *,
                   autocov=None, clamp_nonpositive: bool = True) -> PIEstimate:
    """Cepstral estimate of predictive information of a 1-D Gaussian process.

    Exactly one of ``series_1d`` (samples) or ``autocov`` (``f(0..2T-1)``)
    must be given. Samples are split into length-2T segments with 50%
    overlap, windowed, and their periodograms averaged; an autocovariance is
    tapered by the matching lag window. The log spectrum is inverted to
    cepstrum coefficients ``b_k`` and the estimate is
    ``1/2 * sum_{k=1}^{2T-1} k b_k^2``.
    """
    T = int(T)
    if T < 1:
        raise InvalidArgumentError(f"T must be positive, got {T}")
    if (series_1d is None) == (autocov is None):
        raise InvalidArgumentError("give exactly one of series_1d or autocov")
    L = 2 * T
    if autocov is not None:
        f = np.asarray(autocov, dtype=np.float64).ravel()
        if f.size < L:
            raise InvalidArgumentError(f"autocov needs {L} values, got {f.size}")
        S = _autocov_spectrum(f, T, window_fn)
        mode = "autocov"
    else:
        y = np.asarray(series_1d, dtype=np.float64)
        if y.ndim == 2 and y.shape[1] == 1:
            y = y[:, 0]
        if y.ndim != 1:
            raise InvalidArgumentError("frequency-domain estimate needs a single channel")
        if y.size < L:
            raise InvalidArgumentError(f"series needs at least {L} samples, got {y.size}")
        _, S = welch(y - y.mean(), window=_data_window(L, window_fn), nperseg=L,
                     noverlap=L // 2, nfft=_nfft(T), detrend=False,
                     return_onesided=False, scaling="density")
        mode = "series"
    S, bad = _clamp(S, clamp_nonpositive)
    value, b = _cepstral_pi(S, T)
    return PIEstimate(value, "freq_domain", T, {
        "mode": mode, "window_fn": window_fn, "n_cepstrum": int(b.size),
        "n_fft": int(S.size), "n_clamped": int(bad.sum()), "cepstrum": b.tolist()})


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def pi_analytic_exponential(tau: float) -> PIEstimate:
    """Asymptotic PI of a process with autocovariance ``exp(-|k|/tau)``.

    The process is AR(1), so this is the one-step mutual information.
    """
    tau = float(tau)
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    value = -0.5 * np.log1p(-np.exp(-2.0 / tau))
    return PIEstimate(float(value), "analytic", 0,
                      {"kernel": "exponential", "tau": tau, "asymptotic": True})


def pi_analytic_squared_exponential(tau: float) -> PIEstimate:
    """Large-``tau`` asymptotic PI for autocovariance ``exp(-k^2/tau^2)``: ``zeta(3)/8 tau^4``."""
    tau = float(tau)
    if not tau >= 2:
        raise ApproximationDomainError(f"approximation needs tau >= 2, got {tau}")
    return PIEstimate(ZETA3 / 8.0 * tau ** 4, "analytic", 0,
                      {"kernel": "squared_exponential", "tau": tau,
                       "asymptotic": True, "approximation": True})


# ---------------------------------------------------------------------------
# Gaussian mutual information between lagged projections
# ---------------------------------------------------------------------------

def gaussian_lagged_mi(C0, Ck, U, V=None):
    """Gaussian ``I(U^T x_t ; V^T x_{t+k})`` from ``C0`` and ``Ck = <x_t x_{t+k}^T>``.

    ``V`` defaults to ``U``.
    """
    U = np.atleast_2d(np.asarray(U, dtype=np.float64).T).T
    V = U if V is None else np.atleast_2d(np.asarray(V, dtype=np.float64).T).T
    A = U.T @ C0 @ U
    B = V.T @ C0 @ V
    X = U.T @ Ck @ V
    joint = np.block([[A, X], [X.T, B]])
    return 0.5 * (cholesky_logdet(A) + cholesky_logdet(B) - cholesky_logdet(joint))


# ---------------------------------------------------------------------------
# Nonparametric kNN (Kraskov-Stoegbauer-Grassberger, algorithm 1)
# ---------------------------------------------------------------------------

def mi_knn(x_samples, y_samples, k: int = 3) -> PIEstimate:
    """KSG mutual information estimate with max-norm neighborhoods.

    ``psi(k) + psi(N) - <psi(n_x + 1) + psi(n_y + 1)>`` where ``n_x`` counts
    marginal neighbors strictly closer than the k-th joint neighbor.
    """
    x = np.asarray(x_samples, dtype=np.float64)
    y = np.asarray(y_samples, dtype=np.float64)
    x = x[:, None] if x.ndim == 1 else x
    y = y[:, None] if y.ndim == 1 else y
    N = x.shape[0]
    if y.shape[0] != N:
        raise InvalidArgumentError(f"row counts differ: {N} vs {y.shape[0]}")
    if N < 50:
        raise InvalidArgumentError(f"need at least 50 samples, got {N}")
    k = int(k)
    if not 1 <= k < N:
        raise InvalidArgumentError(f"k must be in [1, {N - 1}], got {k}")
    joint = np.hstack([x, y])
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    eps = dist[:, k]
    if np.any(eps == 0):
        raise JitterRequiredError(
            f"{int((eps == 0).sum())} points have a zero k-NN distance; add small jitter")
    r = np.nextafter(eps, 0)
    nx = cKDTree(x).query_ball_point(x, r, p=np.inf, return_length=True)
    ny = cKDTree(y).query_ball_point(y, r, p=np.inf, return_length=True)
    # counts include the point itself, so they already equal n + 1
    value = digamma(k) + digamma(N) - np.mean(digamma(nx) + digamma(ny))
    return PIEstimate(float(value), "knn", 0, {"k": k, "N": N})
