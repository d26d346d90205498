"""CSV and JSON helpers.

Floats are written with 17 significant digits so a read-back is exact.
"""
import csv
import json

import numpy as np

from .core import Projection, TimeSeries
from .errors import InvalidArgumentError

FLOAT_FMT = "%.17g"


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_csv(path):
    """Read a numeric CSV. Returns ``(data, header)``; header may be None."""
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidArgumentError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    if data.ndim != 2 or (header is not None and data.shape[1] != len(header)):
        raise InvalidArgumentError(f"{path}: ragged rows")
    return data, header


def write_csv(path, data, header=None):
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    with open(path, "w", newline="") as f:
        if header is not None:
            f.write(",".join(header) + "\n")
        for row in data:
            f.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_timeseries(path, dt=1.0):
    data, header = read_csv(path)
    return TimeSeries(data, dt, header)


def write_timeseries(path, series):
    write_csv(path, series.data, series.channel_names)


def read_matrix_csv(path):
    return read_csv(path)[0]


def write_matrix_csv(path, matrix):
    write_csv(path, matrix)


def read_projection(path):
    m = read_matrix_csv(path)
    flag = bool(np.abs(m.T @ m - np.eye(m.shape[1])).max() <= 1e-10)
    return Projection(m, is_orthonormal=flag)


def write_projection(path, proj):
    write_csv(path, proj.matrix)


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
