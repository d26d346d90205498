"""Reference linear methods: PCA, SFA, CCA, plus leverage scores."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import ORTHONORMAL_ATOL, Projection
from .errors import InvalidArgumentError, WhiteningError

logger = logging.getLogger(__name__)

EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray


def _fix_signs(M):
    """Flip columns so each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(M), axis=0)
    s = np.sign(M[idx, np.arange(M.shape[1])])
    s[s == 0] = 1.0
    return M * s, s


def _check_square(C, name, sym_tol=1e-8):
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {C.shape}")
    if sym_tol is not None and np.abs(C - C.T).max() > sym_tol * max(1.0, np.abs(C).max()):
        raise InvalidArgumentError(f"{name} is not symmetric")
    return C


def _check_d(d, n):
    if not 1 <= d <= n:
        raise InvalidArgumentError(f"d must be in [1, {n}], got {d}")


def eigh_desc(C):
    """Symmetric eigendecomposition, descending, with the sign convention applied."""
    w, U = np.linalg.eigh(0.5 * (C + C.T))
    U, _ = _fix_signs(U[:, ::-1])
    return EigenDecomposition(w[::-1], U)


def inv_sqrt(C0):
    """``C0^{-1/2}`` via eigendecomposition; raises if ``C0`` is numerically singular."""
    w, U = np.linalg.eigh(0.5 * (C0 + C0.T))
    if w[0] <= EIG_FLOOR * max(1.0, w[-1]):
        raise WhiteningError(
            f"C0 is singular (smallest eigenvalue {w[0]:.3e}); regularize it first, "
            "e.g. with covariance.regularize_psd")
    return (U / np.sqrt(w)) @ U.T


def pca(C0, d: int) -> Projection:
    """Top-``d`` eigenvectors of the covariance ``C0``."""
    C0 = _check_square(C0, "C0")
    _check_d(d, C0.shape[0])
    return Projection(eigh_desc(C0).vectors[:, :d], is_orthonormal=True)


def sfa(C0, C1, d: int, return_eig=False):
    """Slow feature analysis from same-time and one-step covariances.

    Maximizes ``tr(V^T C1sym V)`` subject to ``V^T C0 V = I`` by whitening.
    If ``C1sym`` is indefinite, components are ordered by squared one-step
    autocorrelation instead, which keeps the d = 1 solution aligned with
    maximal one-step mutual information.
    """
    C0 = _check_square(C0, "C0")
    C1 = _check_square(C1, "C1", sym_tol=None)
    n = C0.shape[0]
    _check_d(d, n)
    W = inv_sqrt(C0)
    C1sym = 0.5 * (C1 + C1.T)
    M = W @ C1sym @ W
    eig = eigh_desc(M)
    values, vecs = eig.values, eig.vectors
    if np.linalg.eigvalsh(C1sym)[0] <= 0:
        logger.warning("sfa: C1sym is not positive definite; ordering by squared autocorrelation")
        order = np.argsort(-values ** 2, kind="stable")
        values, vecs = values[order], vecs[:, order]
    proj = Projection(W @ vecs[:, :d])
    if return_eig:
        return proj, EigenDecomposition(values, vecs)
    return proj


def cca(C0, C1, d: int, return_corr=False):
    """Canonical correlation analysis between ``x_t`` and ``x_{t+lag}``.

    ``C1 = <x_t x_{t+lag}^T>``. Returns past and future projections
    ``(U, V)`` maximizing ``I(U^T x_t ; V^T x_{t+lag})``.
    """
    C0 = _check_square(C0, "C0")
    C1 = _check_square(C1, "C1", sym_tol=None)
    n = C0.shape[0]
    _check_d(d, n)
    W = inv_sqrt(C0)
    Ut, s, Vht = np.linalg.svd(W @ C1 @ W)
    Vt = Vht.T
    Ut, signs = _fix_signs(Ut)
    Vt = Vt * signs
    U = Projection(W @ Ut[:, :d])
    V = Projection(W @ Vt[:, :d])
    if return_corr:
        return U, V, s
    return U, V


def leverage_scores(V) -> np.ndarray:
    """Per-channel leverage ``pi_j = (1/d) sum_i V[j, i]^2`` of an orthonormal basis."""
    M = V.matrix if isinstance(V, Projection) else np.asarray(V, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    d = M.shape[1]
    if np.abs(M.T @ M - np.eye(d)).max() > ORTHONORMAL_ATOL:
        raise InvalidArgumentError("leverage scores need an orthonormal basis; orthonormalize first")
    return np.sum(M * M, axis=1) / d
