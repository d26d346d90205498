"""Data containers and preprocessing transforms.

Samples are stored time-major: ``data[t, i]`` is channel ``i`` at step ``t``.
All containers are immutable; transforms return new objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidArgumentError

ORTHONORMAL_ATOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled multichannel time series.

    Parameters
    ----------
    data : array_like, shape (T_tot, n)
        Samples, one row per time step. A 1-D input is treated as a single
        channel.
    dt : float
        Seconds per step. Informational only.
    channel_names : sequence of str, optional
        One name per column.
    """

    data: np.ndarray
    dt: float = 1.0
    channel_names: Optional[tuple] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise InvalidArgumentError(f"data must be 2-D, got shape {data.shape}")
        if data.shape[0] < 2 or data.shape[1] < 1:
            raise InvalidArgumentError(
                f"need at least 2 time steps and 1 channel, got {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise InvalidArgumentError(
                f"non-finite entry at time {bad[0]}, channel {bad[1]}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        names = self.channel_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != data.shape[1]:
                raise InvalidArgumentError(
                    f"{len(names)} channel names for {data.shape[1]} channels")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "channel_names", names)

    @property
    def n_steps(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    def with_data(self, data, dt=None):
        """Return a copy carrying new samples but the same metadata."""
        names = self.channel_names
        if names is not None and np.asarray(data).reshape(len(data), -1).shape[1] != len(names):
            names = None
        return TimeSeries(data, self.dt if dt is None else dt, names)


@dataclass(frozen=True)
class Projection:
    """Linear map from ``n`` channels to ``d`` latent components.

    The projected series is ``Y = X @ matrix``.
    """

    matrix: np.ndarray
    is_orthonormal: bool = field(default=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        if m.ndim != 2:
            raise InvalidArgumentError(f"projection must be 2-D, got {m.shape}")
        n, d = m.shape
        if d < 1 or d > n:
            raise InvalidArgumentError(f"need 1 <= d <= n, got n={n}, d={d}")
        if not np.all(np.isfinite(m)):
            raise InvalidArgumentError("projection has non-finite entries")
        if np.linalg.matrix_rank(m) < d:
            raise InvalidArgumentError("projection matrix is column-rank deficient")
        if self.is_orthonormal:
            err = np.abs(m.T @ m - np.eye(d)).max()
            if err > ORTHONORMAL_ATOL:
                raise InvalidArgumentError(
                    f"flagged orthonormal but max |V^T V - I| = {err:.2e}")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "is_orthonormal", bool(self.is_orthonormal))

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def d(self):
        return self.matrix.shape[1]

    @classmethod
    def orthonormalized(cls, matrix):
        """QR-orthonormalize ``matrix`` (sign fixed so diag(R) >= 0)."""
        q, r = np.linalg.qr(np.asarray(matrix, dtype=np.float64))
        s = np.sign(np.diag(r))
        s[s == 0] = 1.0
        return cls(q * s, is_orthonormal=True)

    def apply(self, series):
        """Project a :class:`TimeSeries` (or raw array) into latent space."""
        if isinstance(series, TimeSeries):
            if series.n_channels != self.n:
                raise InvalidArgumentError(
                    f"series has {series.n_channels} channels, projection expects {self.n}")
            return TimeSeries(series.data @ self.matrix, series.dt)
        x = np.asarray(series, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise InvalidArgumentError(
                f"data has {x.shape[-1]} channels, projection expects {self.n}")
        return x @ self.matrix


def mean_center(series: TimeSeries, window: Optional[int] = None) -> TimeSeries:
    """Subtract the global mean, or a centered moving average.

    With ``window`` set, each sample has the mean of the ``window`` samples
    centered on it subtracted. Edges are reflect-padded (edge sample not
    repeated), so every sample sees a full-width average.
    """
    x = series.data
    if window is None:
        return series.with_data(x - x.mean(axis=0))
    window = int(window)
    if window <= 0 or window > series.n_steps:
        raise InvalidArgumentError(
            f"window must be in [1, {series.n_steps}], got {window}")
    left = window // 2
    right = window - 1 - left
    padded = np.pad(x, ((left, right), (0, 0)), mode="reflect")
    csum = np.cumsum(np.vstack([np.zeros((1, x.shape[1])), padded]), axis=0)
    avg = (csum[window:] - csum[:-window]) / window
    return series.with_data(x - avg)


def sqrt_transform(series: TimeSeries) -> TimeSeries:
    """Elementwise square root (variance-stabilizes spike counts)."""
    x = series.data
    neg = np.argwhere(x < 0)
    if len(neg):
        t, c = neg[0]
        name = series.channel_names[c] if series.channel_names else str(c)
        raise DomainError(
            f"negative entry {x[t, c]!r} at time index {t}, channel {name}")
    return series.with_data(np.sqrt(x))


def bin_series(series: TimeSeries, bin_width: int, mode: str = "sum") -> TimeSeries:
    """Aggregate non-overlapping bins of ``bin_width`` steps.

    Trailing samples that do not fill a whole bin are dropped.
    """
    bin_width = int(bin_width)
    if bin_width < 1 or bin_width > series.n_steps:
        raise InvalidArgumentError(
            f"bin_width must be in [1, {series.n_steps}], got {bin_width}")
    if mode not in ("sum", "mean"):
        raise InvalidArgumentError(f"mode must be 'sum' or 'mean', got {mode!r}")
    n_bins = series.n_steps // bin_width
    x = series.data[: n_bins * bin_width].reshape(n_bins, bin_width, -1)
    out = x.sum(axis=1) if mode == "sum" else x.mean(axis=1)
    if n_bins < 2:
        raise InvalidArgumentError(
            f"bin_width {bin_width} leaves {n_bins} bin(s); need at least 2")
    return series.with_data(out, dt=series.dt * bin_width)


def as_series(obj, dt=1.0) -> TimeSeries:
    """Coerce an array or :class:`TimeSeries` to :class:`TimeSeries`."""
    if isinstance(obj, TimeSeries):
        return obj
    return TimeSeries(obj, dt)
