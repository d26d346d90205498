"""Inner loops with a numba path and a pure-numpy/scipy path.

The numba path is used when numba imports and ``DYNCOMP_NUMBA`` is not set
to ``0``. Both paths compute the same quantities; ``benchmarks/bench_kernels.py``
times them against each other.
"""
import os

import numpy as np
from scipy.signal import lfilter

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get("DYNCOMP_NUMBA", "1").strip().lower() not in (
    "0", "false", "no", "off")

DIVERGENCE_BOUND = 1e6


# ---------------------------------------------------------------------------
# Lorenz RK4
# ---------------------------------------------------------------------------

def _lorenz_rk4_py(state0, sigma, rho, beta, dt, n_out, stride, n_discard):
    x, y, z = float(state0[0]), float(state0[1]), float(state0[2])
    out = np.empty((n_out, 3))
    half = 0.5 * dt
    total = (n_discard + n_out) * stride
    for step in range(total):
        k1x = sigma * (y - x)
        k1y = x * (rho - z) - y
        k1z = x * y - beta * z
        x2, y2, z2 = x + half * k1x, y + half * k1y, z + half * k1z
        k2x = sigma * (y2 - x2)
        k2y = x2 * (rho - z2) - y2
        k2z = x2 * y2 - beta * z2
        x3, y3, z3 = x + half * k2x, y + half * k2y, z + half * k2z
        k3x = sigma * (y3 - x3)
        k3y = x3 * (rho - z3) - y3
        k3z = x3 * y3 - beta * z3
        x4, y4, z4 = x + dt * k3x, y + dt * k3y, z + dt * k3z
        k4x = sigma * (y4 - x4)
        k4y = x4 * (rho - z4) - y4
        k4z = x4 * y4 - beta * z4
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        z += dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        if not (abs(x) <= DIVERGENCE_BOUND and abs(y) <= DIVERGENCE_BOUND
                and abs(z) <= DIVERGENCE_BOUND):
            return out, False
        if (step + 1) % stride == 0:
            idx = (step + 1) // stride - 1 - n_discard
            if idx >= 0:
                out[idx, 0] = x
                out[idx, 1] = y
                out[idx, 2] = z
    return out, True


# ---------------------------------------------------------------------------
# AR(1) recursion: y[0] = u[0], y[t] = a * y[t-1] + u[t]
# ---------------------------------------------------------------------------

def _ar1_numpy(u, a):
    return lfilter([1.0], [1.0, -a], u)


def _ar1_loop(u, a):
    y = np.empty_like(u)
    y[0] = u[0]
    for t in range(1, u.shape[0]):
        y[t] = a * y[t - 1] + u[t]
    return y


# ---------------------------------------------------------------------------
# Block-Toeplitz assembly from lagged covariances
# ---------------------------------------------------------------------------

def _toeplitz_numpy(lags, T):
    n = lags.shape[1]
    ext = np.concatenate([np.transpose(lags[1:T][::-1], (0, 2, 1)), lags[:T]])
    off = np.arange(T)[None, :] - np.arange(T)[:, None] + (T - 1)
    return ext[off].transpose(0, 2, 1, 3).reshape(n * T, n * T)


def _toeplitz_loop(lags, T):
    n = lags.shape[1]
    out = np.empty((n * T, n * T))
    for bi in range(T):
        for bj in range(T):
            if bj >= bi:
                c = lags[bj - bi]
                for a in range(n):
                    for b in range(n):
                        out[bi * n + a, bj * n + b] = c[a, b]
            else:
                c = lags[bi - bj]
                for a in range(n):
                    for b in range(n):
                        out[bi * n + a, bj * n + b] = c[b, a]
    return out


# ---------------------------------------------------------------------------
# Block-diagonal sums of an inverse covariance: A[k] = sum_i G[i+k, i]
# ---------------------------------------------------------------------------

def _block_diag_sums_numpy(G, T, d):
    G4 = G.reshape(T, d, T, d)
    out = np.empty((T, d, d))
    for k in range(T):
        rows = np.arange(k, T)
        out[k] = G4[rows, :, rows - k, :].sum(axis=0)
    return out


def _block_diag_sums_loop(G, T, d):
    out = np.zeros((T, d, d))
    for k in range(T):
        for i in range(T - k):
            r0 = (i + k) * d
            c0 = i * d
            for a in range(d):
                for b in range(d):
                    out[k, a, b] += G[r0 + a, c0 + b]
    return out


if HAS_NUMBA:
    _lorenz_rk4_numba = numba.njit(cache=True)(_lorenz_rk4_py)
    _ar1_numba = numba.njit(cache=True)(_ar1_loop)
    _toeplitz_numba = numba.njit(cache=True)(_toeplitz_loop)
    _block_diag_sums_numba = numba.njit(cache=True)(_block_diag_sums_loop)
else:  # pragma: no cover
    _lorenz_rk4_numba = _lorenz_rk4_py
    _ar1_numba = _ar1_loop
    _toeplitz_numba = _toeplitz_loop
    _block_diag_sums_numba = _block_diag_sums_loop

IMPLEMENTATIONS = {
    "lorenz_rk4": {"numba": _lorenz_rk4_numba, "numpy": _lorenz_rk4_py},
    "ar1": {"numba": _ar1_numba, "numpy": _ar1_numpy},
    "toeplitz": {"numba": _toeplitz_numba, "numpy": _toeplitz_numpy},
    "block_diag_sums": {"numba": _block_diag_sums_numba, "numpy": _block_diag_sums_numpy},
}


def backend():
    """Name of the active kernel path, ``'numba'`` or ``'numpy'``."""
    return "numba" if USE_NUMBA else "numpy"


def lorenz_rk4(state0, sigma, rho, beta, dt, n_out, stride, n_discard):
    fn = IMPLEMENTATIONS["lorenz_rk4"][backend()]
    return fn(np.ascontiguousarray(state0, dtype=np.float64), float(sigma), float(rho),
              float(beta), float(dt), int(n_out), int(stride), int(n_discard))


def ar1(u, a):
    return IMPLEMENTATIONS["ar1"][backend()](np.ascontiguousarray(u, dtype=np.float64), float(a))


def toeplitz(lags, T):
    return IMPLEMENTATIONS["toeplitz"][backend()](
        np.ascontiguousarray(lags, dtype=np.float64), int(T))


def block_diag_sums(G, T, d):
    return IMPLEMENTATIONS["block_diag_sums"][backend()](
        np.ascontiguousarray(G, dtype=np.float64), int(T), int(d))
