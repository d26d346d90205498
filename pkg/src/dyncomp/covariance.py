"""Lagged cross-covariances and the block-Toeplitz spatiotemporal covariance."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import Projection, as_series
from .errors import InsufficientDataError, InvalidArgumentError

logger = logging.getLogger(__name__)

SYMMETRY_ATOL = 1e-10
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class CrossCovSet:
    """Lagged cross-covariances ``lags[k] = <x_t x_{t+k}^T>``, k = 0..two_t-1."""

    lags: np.ndarray

    def __post_init__(self):
        lags = np.array(self.lags, dtype=np.float64, copy=True)
        if lags.ndim == 1:
            lags = lags[:, None, None]
        if lags.ndim != 3 or lags.shape[1] != lags.shape[2] or lags.shape[0] < 1:
            raise InvalidArgumentError(
                f"lags must have shape (two_t, n, n), got {lags.shape}")
        if not np.all(np.isfinite(lags)):
            raise InvalidArgumentError("cross-covariances contain non-finite entries")
        c0 = lags[0]
        asym = np.abs(c0 - c0.T).max()
        if asym > SYMMETRY_ATOL * max(1.0, np.abs(c0).max()):
            raise InvalidArgumentError(f"C_0 is not symmetric (max asymmetry {asym:.2e})")
        lags[0] = 0.5 * (c0 + c0.T)
        scale = max(1.0, np.abs(lags[0]).max())
        if np.linalg.eigvalsh(lags[0])[0] < -1e-8 * scale:
            raise InvalidArgumentError("C_0 is not positive semidefinite")
        lags.setflags(write=False)
        object.__setattr__(self, "lags", lags)

    @property
    def n(self):
        return self.lags.shape[1]

    @property
    def two_t(self):
        return self.lags.shape[0]

    def __len__(self):
        return self.two_t

    def __getitem__(self, k):
        return self.lags[k]

    def truncate(self, num_lags):
        """Keep only the first ``num_lags`` lags."""
        if num_lags > self.two_t:
            raise InvalidArgumentError(f"only {self.two_t} lags available, asked {num_lags}")
        return CrossCovSet(self.lags[:num_lags])

    def time_reversed(self):
        """Covariances of the time-reversed process (each lag transposed)."""
        return CrossCovSet(np.transpose(self.lags, (0, 2, 1)))

    def save(self, directory, shift_applied=0.0):
        """Write ``C_0000.csv`` ... plus ``manifest.json`` into ``directory``."""
        from .io import write_matrix_csv
        os.makedirs(directory, exist_ok=True)
        for k, c in enumerate(self.lags):
            write_matrix_csv(os.path.join(directory, f"C_{k:04d}.csv"), c)
        manifest = {"n": self.n, "two_t": self.two_t, "shift_applied": float(shift_applied)}
        with open(os.path.join(directory, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2)

    @classmethod
    def load(cls, directory):
        from .io import read_matrix_csv
        with open(os.path.join(directory, "manifest.json")) as f:
            manifest = json.load(f)
        lags = [read_matrix_csv(os.path.join(directory, f"C_{k:04d}.csv"))
                for k in range(manifest["two_t"])]
        covs = cls(np.stack(lags))
        if covs.n != manifest["n"]:
            raise InvalidArgumentError(
                f"manifest says n={manifest['n']}, matrices are {covs.n}x{covs.n}")
        return covs


@dataclass(frozen=True)
class BlockToeplitzCov:
    """Dense spatiotemporal covariance over ``T`` steps.

    ``shift`` is the diagonal loading added by :func:`regularize_psd`
    (already included in ``blocks`` and ``dense``).
    """

    blocks: CrossCovSet
    T: int
    dense: np.ndarray
    shift: float = 0.0


def _segment_bounds(T_tot, chunk):
    if chunk is None:
        return [(0, T_tot)]
    chunk = int(chunk)
    if chunk < 1:
        raise InvalidArgumentError(f"chunk must be positive, got {chunk}")
    return [(s, min(s + chunk, T_tot)) for s in range(0, T_tot, chunk)]


def estimate_crosscov(series, num_lags: int, chunk: Optional[int] = None) -> CrossCovSet:
    """Estimate ``C_k = <x_t x_{t+k}^T>`` for k = 0..num_lags-1.

    Each lag is normalized by its own pair count. With ``chunk`` set the
    series is treated as consecutive independent segments of that length and
    no product straddles a segment boundary. The input should already be
    mean-centered; a warning is logged otherwise.
    """
    series = as_series(series)
    x = series.data
    T_tot, n = x.shape
    num_lags = int(num_lags)
    if num_lags < 1:
        raise InvalidArgumentError(f"num_lags must be positive, got {num_lags}")
    if num_lags >= T_tot:
        raise InsufficientDataError(f"num_lags={num_lags} needs more than {T_tot} samples")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    if np.any(np.abs(mean) > 1e-6 * np.where(std > 0, std, 1.0)):
        logger.warning("estimate_crosscov: input does not look mean-centered")

    sums = np.zeros((num_lags, n, n))
    counts = np.zeros(num_lags)
    for start, stop in _segment_bounds(T_tot, chunk):
        seg = x[start:stop]
        L = stop - start
        for k in range(min(num_lags, L)):
            sums[k] += seg[: L - k].T @ seg[k:]
            counts[k] += L - k
    if np.any(counts == 0):
        raise InsufficientDataError(
            f"segments of length {chunk} are too short for {num_lags} lags")
    lags = sums / counts[:, None, None]
    lags[0] = 0.5 * (lags[0] + lags[0].T)
    return CrossCovSet(lags)


def assemble_block_toeplitz(covs: CrossCovSet, T: int) -> BlockToeplitzCov:
    """Realize the ``nT x nT`` matrix whose block (i, j), j >= i, is ``C_{j-i}``."""
    T = int(T)
    if T < 1 or T > covs.two_t:
        raise InvalidArgumentError(f"T must be in [1, {covs.two_t}], got {T}")
    dense = _kernels.toeplitz(covs.lags, T)
    dense = 0.5 * (dense + dense.T)
    return BlockToeplitzCov(covs, T, dense)


def regularize_psd(cov: BlockToeplitzCov, floor: float = DEFAULT_FLOOR) -> BlockToeplitzCov:
    """Load the diagonal of ``C_0`` so the smallest eigenvalue is at least ``floor``.

    Adding ``s`` to ``C_0``'s diagonal adds ``s`` to every diagonal entry of the
    block-Toeplitz matrix, so a single eigenvalue computation suffices.
    """
    lam_min = np.linalg.eigvalsh(cov.dense)[0]
    if lam_min >= floor:
        return cov
    shift = float(floor - lam_min)
    lags = np.array(cov.blocks.lags)
    lags[0] = lags[0] + shift * np.eye(cov.blocks.n)
    blocks = CrossCovSet(lags)
    dense = cov.dense + shift * np.eye(cov.dense.shape[0])
    return BlockToeplitzCov(blocks, cov.T, dense, cov.shift + shift)


def regularize_crosscov(covs: CrossCovSet, T: Optional[int] = None,
                        floor: float = DEFAULT_FLOOR):
    """Regularize so the ``T``-step block-Toeplitz matrix has min eigenvalue >= floor.

    Returns ``(covs, shift)``. ``T`` defaults to all available lags.
    """
    T = covs.two_t if T is None else T
    reg = regularize_psd(assemble_block_toeplitz(covs, T), floor)
    return reg.blocks, reg.shift


def project_crosscov(covs: CrossCovSet, proj) -> CrossCovSet:
    """Map every lag through ``C_k -> V^T C_k V``."""
    V = proj.matrix if isinstance(proj, Projection) else np.asarray(proj, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != covs.n:
        raise InvalidArgumentError(
            f"projection has {V.shape[0]} rows, covariances are {covs.n}x{covs.n}")
    lags = np.einsum("ia,kij,jb->kab", V, covs.lags, V, optimize=True)
    lags[0] = 0.5 * (lags[0] + lags[0].T)
    return CrossCovSet(lags)


def crosscov_from_data(series, T: int, chunk: Optional[int] = None, center=True):
    """Center ``series`` and estimate the ``2T`` lags needed at window ``T``."""
    from .core import mean_center
    series = as_series(series)
    if center:
        series = mean_center(series)
    return estimate_crosscov(series, 2 * int(T), chunk=chunk)

