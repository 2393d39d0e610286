"""Input coercion helpers used by the estimator front end."""
from __future__ import annotations

import math
import os

import numpy as np

from .exceptions import BadConfig
from .ingest import PacketTrace, read_trace


def check_trace(X) -> PacketTrace:
    """Coerce ``X`` to a :class:`PacketTrace`.

    Accepts a trace, a path to a pcap/CSV file, an ``(n, 3)`` array of
    ``(t, dest, size)`` rows, or an iterable of records.
    """
    if isinstance(X, PacketTrace):
        return X
    if isinstance(X, (str, os.PathLike)):
        return read_trace(X)
    if hasattr(X, "to_numpy"):
        X = X.to_numpy()
    if isinstance(X, np.ndarray):
        if X.ndim != 2 or X.shape[1] != 3:
            raise ValueError(f"expected an (n, 3) array of (t, dest, size), got shape {X.shape}")
        sizes = X[:, 2]
        dests = X[:, 1]
        if not (np.all(sizes == np.round(sizes)) and np.all(dests == np.round(dests))):
            raise ValueError("dest and size columns must hold integers")
        return PacketTrace(X[:, 0], dests.astype(np.int64), sizes.astype(np.int64))
    return PacketTrace.from_records(X)


def check_series_matrix(X, min_length=1) -> np.ndarray:
    """2-D float array of series, one per row, all finite."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of series, got {X.ndim} dimensions")
    if X.shape[1] < min_length:
        raise ValueError(f"series need at least {min_length} values, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinity")
    return X


def check_positive(name, value, allow_none=False):
    if value is None and allow_none:
        return value
    if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool) \
            or not math.isfinite(value) or value <= 0:
        raise BadConfig(f"{name} must be a positive number, got {value!r}")
    return value


def check_choice(name, value, choices):
    if value not in choices:
        raise BadConfig(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
