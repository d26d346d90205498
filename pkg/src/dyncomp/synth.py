"""Synthetic data: Lorenz attractor, noisy random embeddings, Gaussian processes.

Also exact (population) cross-covariances for AR(1) and VAR(1) processes,
used as ground truth when checking estimators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov, solve_triangular, subspace_angles
from scipy.stats import ortho_group

from . import _kernels
from .core import Projection, TimeSeries, as_series
from .covariance import CrossCovSet
from .errors import DivergenceError, InvalidArgumentError, KernelDegeneracyError

KERNELS = ("exponential", "squared_exponential")


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    beta: float = 8.0 / 3.0
    rho: float = 28.0
    dt: float = 5e-3
    downsample: int = 5

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.downsample < 1:
            raise InvalidArgumentError(f"downsample must be >= 1, got {self.downsample}")


@dataclass(frozen=True)
class NoiseSpec:
    """Noise covariance with eigenvalues ``variance * exp(-2 j / d_noise)``, j = 0, 1, ..."""

    variance: float = 1.0
    d_noise: float = 7.0
    seed: int = 0

    def __post_init__(self):
        if not self.variance >= 0:
            raise InvalidArgumentError(f"variance must be nonnegative, got {self.variance}")
        if not self.d_noise > 0:
            raise InvalidArgumentError(f"d_noise must be positive, got {self.d_noise}")

    def eigenvalues(self, n):
        return self.variance * np.exp(-2.0 * np.arange(n) / self.d_noise)


def lorenz_generate(params: LorenzParams = LorenzParams(), n_steps: int = 10000,
                    seed: int = 0, transient: int = 1000) -> TimeSeries:
    """Integrate the Lorenz system with RK4 and return a centered trajectory.

    ``n_steps`` and ``transient`` count downsampled samples. The initial state
    is ``(1, 1, 1)`` plus a standard normal perturbation.
    """
    if n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be >= 1, got {n_steps}")
    rng = np.random.default_rng(seed)
    x0 = np.ones(3) + rng.standard_normal(3)
    out, ok = _kernels.lorenz_rk4(x0, params.sigma, params.rho, params.beta, params.dt,
                                  max(n_steps, 2), params.downsample, transient)
    if not ok:
        raise DivergenceError("Lorenz integration left |state| <= 1e6")
    out = out[:n_steps] if n_steps >= 2 else out
    return TimeSeries(out - out.mean(axis=0), params.dt * params.downsample, ("x", "y", "z"))


def _angle_statistic(basis, subspace):
    return float(np.mean(subspace_angles(basis, subspace)))


def noise_covariance(n, noise: NoiseSpec, signal_subspace=None, rng=None, n_reference=1000):
    """Draw a noise covariance ``U diag(lambda) U^T``.

    When ``signal_subspace`` (n x k, orthonormal) is given, the eigenvectors
    are rejection-sampled so that the mean principal angle between the
    leading ``round(d_noise)`` eigenvectors and the signal subspace lies in
    the middle tercile of ``n_reference`` uniformly random draws.

    Returns ``(cov, eigvecs, eigvals)``.
    """
    rng = np.random.default_rng(rng)
    lam = noise.eigenvalues(n)
    if n == 1:
        U = np.ones((1, 1))
        return lam * U, U, lam
    lead = int(min(n, max(1, round(noise.d_noise))))
    if signal_subspace is None:
        U = ortho_group.rvs(n, random_state=rng)
    else:
        ref = [_angle_statistic(ortho_group.rvs(n, random_state=rng)[:, :lead], signal_subspace)
               for _ in range(n_reference)]
        lo, hi = np.quantile(ref, [1 / 3, 2 / 3])
        while True:
            U = ortho_group.rvs(n, random_state=rng)
            if lo <= _angle_statistic(U[:, :lead], signal_subspace) <= hi:
                break
    cov = (U * lam) @ U.T
    return 0.5 * (cov + cov.T), U, lam


def embed_noisy(latent, n: int, noise: NoiseSpec = NoiseSpec(), snr: float = 1.0,
                seed: int = 0, return_noise=False):
    """Embed ``latent`` into ``n`` dimensions and add structured white noise.

    The embedding is a random orthonormal ``n x k`` matrix. The noise scale
    is set so that (top PC variance of the latent) / (top noise eigenvalue)
    equals ``snr``; ``noise.variance`` is ignored. ``snr=inf`` adds no noise.

    Returns ``(series, embedding)``, plus the noise covariance when
    ``return_noise`` is set.
    """
    latent = as_series(latent)
    k = latent.n_channels
    if n < k:
        raise InvalidArgumentError(f"ambient dimension {n} < latent dimension {k}")
    if not snr > 0:
        raise InvalidArgumentError(f"snr must be positive, got {snr}")
    rng = np.random.default_rng([seed, noise.seed])
    W = Projection.orthonormalized(rng.standard_normal((n, k)))
    x = latent.data @ W.matrix.T
    top_var = np.linalg.eigvalsh(np.cov(latent.data, rowvar=False).reshape(k, k))[-1]
    spec = NoiseSpec(0.0 if np.isinf(snr) else top_var / snr, noise.d_noise, noise.seed)
    cov, U, lam = noise_covariance(n, spec, W.matrix, rng)
    if spec.variance > 0:
        x = x + (rng.standard_normal((latent.n_steps, n)) * np.sqrt(lam)) @ U.T
    series = TimeSeries(x, latent.dt)
    if return_noise:
        return series, W, cov
    return series, W


# ---------------------------------------------------------------------------
# Gaussian processes
# ---------------------------------------------------------------------------

def kernel_autocov(kernel, tau, num_lags):
    """Autocovariance ``f(0..num_lags-1)`` of a unit-variance kernel."""
    k = np.arange(num_lags, dtype=np.float64)
    if kernel == "exponential":
        return np.exp(-k / tau)
    if kernel == "squared_exponential":
        return np.exp(-(k / tau) ** 2)
    raise InvalidArgumentError(f"kernel must be one of {KERNELS}, got {kernel!r}")


def gp_generate(kernel: str, tau: float, n_steps: int, seed: int = 0) -> TimeSeries:
    """Sample a stationary unit-variance Gaussian process.

    The exponential kernel is generated exactly as AR(1) with coefficient
    ``exp(-1/tau)``. The squared-exponential kernel is sampled block by block
    from the Cholesky factor of the (jittered) window covariance, each block
    conditioned on the preceding ``ceil(6 tau)`` samples.
    """
    if n_steps < 2:
        raise InvalidArgumentError(f"n_steps must be >= 2, got {n_steps}")
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    rng = np.random.default_rng(seed)
    if kernel == "exponential":
        a = np.exp(-1.0 / tau)
        u = rng.standard_normal(n_steps)
        u[1:] *= np.sqrt(1.0 - a * a)
        return TimeSeries(_kernels.ar1(u, a))
    if kernel != "squared_exponential":
        raise InvalidArgumentError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    overlap = int(min(n_steps - 1, np.ceil(6 * tau)))
    block = int(min(n_steps, max(256, 4 * overlap)))
    W = overlap + block
    f = kernel_autocov(kernel, tau, W)
    K = f[np.abs(np.subtract.outer(np.arange(W), np.arange(W)))] + 1e-10 * np.eye(W)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        raise KernelDegeneracyError("kernel matrix not positive definite after jitter") from None
    y = np.empty(n_steps)
    first = min(n_steps, W)
    y[:first] = L[:first, :first] @ rng.standard_normal(first)
    pos = first
    Loo = L[:overlap, :overlap]
    Lbo = L[overlap:, :overlap]
    Lbb = L[overlap:, overlap:]
    while pos < n_steps:
        m = min(block, n_steps - pos)
        z_o = solve_triangular(Loo, y[pos - overlap:pos], lower=True)
        new = Lbo @ z_o + Lbb @ rng.standard_normal(block)
        y[pos:pos + m] = new[:m]
        pos += m
    return TimeSeries(y)


# ---------------------------------------------------------------------------
# Population cross-covariances
# ---------------------------------------------------------------------------

def ar1_crosscov(tau, num_lags):
    """Exact lags of the unit-variance process with autocovariance ``exp(-|k|/tau)``."""
    return CrossCovSet(kernel_autocov("exponential", tau, num_lags))


def var1_crosscov(A, noise_cov, num_lags):
    """Exact lags of ``x_{t+1} = A x_t + e_t`` with ``Cov(e) = noise_cov``.

    ``C_k = <x_t x_{t+k}^T> = C_0 (A^k)^T``.
    """
    A = np.asarray(A, dtype=np.float64)
    if np.abs(np.linalg.eigvals(A)).max() >= 1:
        raise InvalidArgumentError("VAR(1) transition matrix is not stable")
    C0 = solve_discrete_lyapunov(A, np.asarray(noise_cov, dtype=np.float64))
    C0 = 0.5 * (C0 + C0.T)
    lags = [C0]
    for _ in range(1, num_lags):
        lags.append(lags[-1] @ A.T)
    return CrossCovSet(np.stack(lags))
