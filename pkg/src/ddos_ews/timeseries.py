"""Windowing of packet traces and construction of observable matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import BadConfig, EmptyWindow
from .ingest import PacketTrace

AGG_MODES = ("mean", "sum", "max", "count")
_AGG_ALIASES = {"mean-size": "mean", "sum-size": "sum", "max-size": "max"}

# tolerance for bin/window edge arithmetic on microsecond timestamps
_EDGE_EPS = 1e-9


def normalize_agg(agg: str) -> str:
    agg = _AGG_ALIASES.get(agg, agg)
    if agg not in AGG_MODES:
        raise BadConfig(f"agg must be one of {AGG_MODES}, got {agg!r}")
    return agg


@dataclass(frozen=True)
class Window:
    """One analysis window ``[start_t, end_t)`` and its records.

    ``end_t - start_t`` is always the configured window length. A window that
    runs past the end of the trace is flagged ``partial``; ``data_end`` is
    then where the trace stops.
    """

    index: int
    start_t: float
    end_t: float
    records: PacketTrace
    partial: bool = False
    data_end: float = None

    @property
    def length(self) -> float:
        return self.end_t - self.start_t

    @property
    def span(self) -> float:
        """Length of the part of the window actually covered by the trace."""
        if self.data_end is None:
            return self.length
        return min(self.end_t, self.data_end) - self.start_t

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class ObservableMatrix:
    """Destinations x time bins grid of aggregated packet sizes."""

    dests: Tuple[int, ...]
    bin_width: float
    values: np.ndarray
    start_t: float = 0.0

    @property
    def shape(self):
        return self.values.shape

    def submatrix(self, first_bin: int, n_bins: int) -> "ObservableMatrix":
        return ObservableMatrix(self.dests, self.bin_width,
                                self.values[:, first_bin:first_bin + n_bins],
                                self.start_t + first_bin * self.bin_width)


@dataclass(frozen=True)
class WindowSeries:
    z: np.ndarray
    origin: str = "aggregate"

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 1 or len(z) < 1:
            raise ValueError("a series needs at least one value")
        if not np.all(np.isfinite(z)):
            raise ValueError("series values must be finite")
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.z)


def segment_windows(trace: PacketTrace, window_len: float = 60.0,
                    stride: float = None) -> List[Window]:
    """Cut a trace into windows of ``window_len`` seconds every ``stride`` seconds.

    Windows start at 0 and cover the trace up to its nominal end (see
    :attr:`PacketTrace.end_time`). Windows may be empty; the ones reaching
    past the end are flagged partial. An empty trace without a duration
    gives no windows.
    """
    if stride is None:
        stride = window_len
    if not (window_len > 0) or not math.isfinite(window_len):
        raise BadConfig(f"window_len must be positive, got {window_len}")
    if not (stride > 0) or stride > window_len + _EDGE_EPS:
        raise BadConfig(f"stride must be in (0, window_len], got {stride}")

    trace_end = trace.end_time
    if len(trace) == 0 and not trace_end > 0:
        return []
    last_t = float(trace.t[-1]) if len(trace) else 0.0
    n = max(math.ceil(trace_end / stride - _EDGE_EPS), math.floor(last_t / stride + _EDGE_EPS) + 1)

    windows = []
    for k in range(n):
        start = k * stride
        end = start + window_len
        lo = np.searchsorted(trace.t, start - _EDGE_EPS, side="left")
        hi = np.searchsorted(trace.t, end - _EDGE_EPS, side="left")
        records = PacketTrace(trace.t[lo:hi], trace.dest[lo:hi], trace.size[lo:hi])
        partial = end > trace_end + _EDGE_EPS
        windows.append(Window(k, start, end, records, partial,
                              trace_end if partial else None))
    return windows


def _n_columns(window: Window, bin_width: float) -> int:
    full = math.ceil(window.length / bin_width - _EDGE_EPS)
    if not window.partial:
        return full
    cols = math.ceil(window.span / bin_width - _EDGE_EPS)
    if len(window.records):
        last = int(math.floor((window.records.t[-1] - window.start_t) / bin_width + _EDGE_EPS))
        cols = max(cols, last + 1)
    return max(1, min(full, cols))


def build_observable_matrix(window: Window, bin_width: float = 0.1, agg: str = "mean",
                            min_samples: int = 10) -> ObservableMatrix:
    """Aggregate packet sizes per (destination, time bin).

    Only destinations with at least ``min_samples`` records in the window
    become rows; empty bins hold 0.
    """
    if not (bin_width > 0):
        raise BadConfig(f"bin_width must be positive, got {bin_width}")
    agg = normalize_agg(agg)
    recs = window.records
    if len(recs) == 0:
        raise EmptyWindow(f"window {window.index} has no records")
    dests, counts = np.unique(recs.dest, return_counts=True)
    kept = dests[counts >= min_samples]
    if len(kept) == 0:
        raise EmptyWindow(
            f"window {window.index}: no destination has {min_samples} or more records")

    ncols = _n_columns(window, bin_width)
    row_of = np.searchsorted(kept, recs.dest)
    mask = (row_of < len(kept)) & (kept[np.minimum(row_of, len(kept) - 1)] == recs.dest)
    rows = row_of[mask]
    cols = np.floor((recs.t[mask] - window.start_t) / bin_width + _EDGE_EPS).astype(np.int64)
    cols = np.clip(cols, 0, ncols - 1)
    sizes = recs.size[mask].astype(np.float64)
    flat = rows * ncols + cols
    ncells = len(kept) * ncols

    if agg == "count":
        values = np.bincount(flat, minlength=ncells).astype(np.float64)
    elif agg == "sum":
        values = np.bincount(flat, weights=sizes, minlength=ncells)
    elif agg == "mean":
        total = np.bincount(flat, weights=sizes, minlength=ncells)
        n = np.bincount(flat, minlength=ncells)
        values = np.divide(total, n, out=np.zeros(ncells), where=n > 0)
    else:
        values = np.zeros(ncells)
        np.maximum.at(values, flat, sizes)
    values = values.reshape(len(kept), ncols)
    values.setflags(write=False)
    return ObservableMatrix(tuple(int(d) for d in kept), float(bin_width), values,
                            window.start_t)


def extract_series(matrix: ObservableMatrix, mode: str = "aggregate"):
    """Series view of a matrix.

    ``aggregate`` returns one :class:`WindowSeries` (column-wise mean over
    destinations); ``per-destination`` returns a list with one per row.
    """
    if matrix.values.size == 0:
        raise EmptyWindow("matrix is empty")
    if mode == "aggregate":
        return WindowSeries(matrix.values.mean(axis=0), "aggregate")
    if mode in ("per-destination", "per_destination"):
        return [WindowSeries(row, f"dest:{d}") for d, row in zip(matrix.dests, matrix.values)]
    raise BadConfig(f"unknown series mode {mode!r}")


def raw_series(window: Window) -> WindowSeries:
    """Per-packet sizes in arrival order, without binning."""
    if len(window.records) == 0:
        raise EmptyWindow(f"window {window.index} has no records")
    return WindowSeries(window.records.size.astype(np.float64), "raw")


def write_matrix_csv(matrix: ObservableMatrix, path) -> None:
    ncols = matrix.values.shape[1]
    header = "dest_id," + ",".join(f"bin_{j}" for j in range(ncols))
    body = np.column_stack([np.asarray(matrix.dests, dtype=np.float64), matrix.values])
    fmt = ["%d"] + ["%.10g"] * ncols
    np.savetxt(path, body, fmt=fmt, delimiter=",", header=header, comments="")
