"""Leading indicators: return rate, lag-1 autocorrelation, CV and skewness.

The scalar functions take a :class:`~ddos_ews.timeseries.WindowSeries` or any
1-D array-like and raise an :class:`~ddos_ews.exceptions.IndicatorUndefined`
subclass when the value does not exist. :func:`indicator_trajectory` computes
all four over rolling sub-windows and records those failures as nulls with a
reason instead.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (
    BadConfig,
    DegenerateMatrix,
    IllConditioned,
    SigmaZero,
    TooShort,
    ZeroMean,
)
from .timeseries import ObservableMatrix, Window, WindowSeries, build_observable_matrix

INDICATORS = ("return_rate", "ac1", "cv", "skewness")
SKEW_VARIANTS = ("standard", "sqrt-m2")
MIN_RR_COLUMNS = 10
RIDGE = 1e-6
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SummaryStats:
    mu: float
    sd: float   # divisor n - 1
    var: float  # divisor n


@dataclass(frozen=True)
class Ar1Fit:
    lam: float
    residual_rms: float
    coef: np.ndarray = field(repr=False, default=None)


@dataclass
class IndicatorSample:
    t_mid: float
    return_rate: Optional[float] = None
    ac1: Optional[float] = None
    cv: Optional[float] = None
    skewness: Optional[float] = None
    null_reasons: Dict[str, str] = field(default_factory=dict)

    def value(self, name):
        return getattr(self, name)


def _as_array(s) -> np.ndarray:
    z = s.z if isinstance(s, WindowSeries) else np.asarray(s, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    if not np.all(np.isfinite(z)):
        raise ValueError("series values must be finite")
    return z


def _normalize_variant(variant):
    if variant not in SKEW_VARIANTS:
        raise BadConfig(f"skew variant must be one of {SKEW_VARIANTS}, got {variant!r}")
    return variant


# --- vectorised core (rows = independent series) -------------------------

def _detrend_rows(V):
    """Residuals of a per-row least-squares line."""
    n = V.shape[1]
    t = np.arange(n, dtype=np.float64)
    t -= t.mean()
    mu = V.mean(axis=1, keepdims=True)
    denom = (t * t).sum()
    slope = ((V - mu) * t).sum(axis=1, keepdims=True) / denom if denom > 0 else 0.0
    return V - mu - slope * t


def _row_stats(V, variant="standard", detrend=False):
    """All four indicator columns for every row of ``V``.

    Returns (mu, ac1, cv, skew, slope, reasons) where the numeric arrays
    carry NaN at undefined entries and ``reasons`` maps indicator name to
    an object array of reason strings (or None).
    """
    k, n = V.shape
    mu = V.mean(axis=1)
    d_raw = V - mu[:, None]
    d = _detrend_rows(V) if detrend else d_raw
    constant = np.ptp(V, axis=1) == 0 if n else np.ones(k, bool)
    m2_raw = (d_raw * d_raw).mean(axis=1) if n else np.zeros(k)
    m2 = (d * d).mean(axis=1) if n else np.zeros(k)
    flat = constant | (m2 <= 0)

    reasons = {name: np.full(k, None, dtype=object) for name in INDICATORS}

    with np.errstate(divide="ignore", invalid="ignore"):
        if n >= 3:
            cross = (d[:, :-1] * d[:, 1:]).mean(axis=1)
            ac1 = np.clip(cross / m2, -1.0, 1.0)
            m3 = (d * d * d).mean(axis=1)
            skew = m3 / m2 ** 1.5 if variant == "standard" else m3 / np.sqrt(m2)
            ac1[flat] = np.nan
            skew[flat] = np.nan
            reasons["ac1"][flat] = SigmaZero.__name__
            reasons["skewness"][flat] = SigmaZero.__name__
        else:
            ac1 = np.full(k, np.nan)
            skew = np.full(k, np.nan)
            reasons["ac1"][:] = TooShort.__name__
            reasons["skewness"][:] = TooShort.__name__

        if n >= 2:
            sd = np.sqrt(m2_raw * n / (n - 1))
            sd[constant] = 0.0
            zero = mu == 0
            cv = sd / mu
            cv[zero] = np.nan
            reasons["cv"][zero] = ZeroMean.__name__
        else:
            cv = np.full(k, np.nan)
            reasons["cv"][:] = TooShort.__name__

        if n >= 2:
            num = (d[:, :-1] * d[:, 1:]).sum(axis=1)
            den = (d[:, :-1] * d[:, :-1]).sum(axis=1)
            slope = num / den
            slope[flat | (den <= 0)] = np.nan
        else:
            slope = np.full(k, np.nan)
    return mu, ac1, cv, skew, slope, reasons


# --- scalar API ------------------------------------------------------------

def summary_stats(s) -> SummaryStats:
    z = _as_array(s)
    n = len(z)
    if n < 2:
        raise TooShort(f"need at least 2 values, got {n}")
    mu = float(z.mean())
    if np.ptp(z) == 0:
        return SummaryStats(mu, 0.0, 0.0)
    ss = float(((z - mu) ** 2).sum())
    return SummaryStats(mu, math.sqrt(ss / (n - 1)), ss / n)


def lag1_autocorrelation(s, detrend=False) -> float:
    """Lag-1 autocorrelation with one global mean and population variance.

    ``mean_t[(z_t - mu)(z_{t+1} - mu)] / sigma^2`` over the n - 1 adjacent
    pairs, clamped to [-1, 1].
    """
    z = _as_array(s)
    if len(z) < 3:
        raise TooShort(f"need at least 3 values, got {len(z)}")
    _, ac1, _, _, _, reasons = _row_stats(z[None, :], detrend=detrend)
    if reasons["ac1"][0]:
        raise SigmaZero("series is constant")
    return float(ac1[0])


def coefficient_of_variation(s) -> float:
    st = summary_stats(s)
    if st.mu == 0:
        raise ZeroMean("mean is zero")
    return st.sd / st.mu


def skewness(s, variant="standard", detrend=False) -> float:
    """Third central moment over ``m2**1.5`` (standard) or over ``sqrt(m2)`` (sqrt-m2)."""
    variant = _normalize_variant(variant)
    z = _as_array(s)
    if len(z) < 3:
        raise TooShort(f"need at least 3 values, got {len(z)}")
    _, _, _, skew, _, reasons = _row_stats(z[None, :], variant, detrend)
    if reasons["skewness"][0]:
        raise SigmaZero("series is constant")
    return float(skew[0])


def _matrix_values(m) -> np.ndarray:
    if isinstance(m, ObservableMatrix):
        return m.values
    if isinstance(m, WindowSeries):
        return m.z[None, :]
    x = np.asarray(m, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return x


def fit_ar1(m, detrend=False) -> Ar1Fit:
    """Least-squares first-order autoregression from column j to column j + 1.

    Rows are demeaned (or linearly detrended) first. A single row gives the
    plain regression slope; several rows give a ridge-damped transition
    matrix. ``lam`` is the largest eigenvalue modulus.
    """
    x = _matrix_values(m)
    rows, n = x.shape
    if rows < 1 or n < MIN_RR_COLUMNS:
        raise TooShort(f"need at least 1 row and {MIN_RR_COLUMNS} columns, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix values must be finite")
    constant = np.ptp(x, axis=1) == 0
    if constant.all():
        raise DegenerateMatrix("every row is constant")
    d = _detrend_rows(x) if detrend else x - x.mean(axis=1, keepdims=True)
    d[constant] = 0.0
    x0, x1 = d[:, :-1], d[:, 1:]

    if rows == 1:
        den = float(x0[0] @ x0[0])
        if not den > 0:
            raise IllConditioned("lagged series has zero energy")
        a = float(x1[0] @ x0[0]) / den
        resid = x1[0] - a * x0[0]
        return Ar1Fit(abs(a), float(np.sqrt(np.mean(resid ** 2))), np.array([[a]]))

    c0 = x0 @ x0.T / (n - 1)
    c10 = x1 @ x0.T / (n - 1)
    alpha = RIDGE * float(np.mean(np.var(x, axis=1)))
    gram = c0 + alpha * np.eye(rows)
    if not np.isfinite(gram).all() or np.linalg.cond(gram) > MAX_CONDITION:
        raise IllConditioned("lagged covariance is rank-deficient")
    a = np.linalg.solve(gram.T, c10.T).T
    if not np.isfinite(a).all():
        raise IllConditioned("non-finite transition matrix")
    resid = x1 - a @ x0
    lam = float(np.max(np.abs(np.linalg.eigvals(a))))
    return Ar1Fit(lam, float(np.sqrt(np.mean(resid ** 2))), a)


def return_rate(m, detrend=False):
    """Return ``(1 - min(lam, 1), fit)`` for the fitted autoregression."""
    fit = fit_ar1(m, detrend=detrend)
    return 1.0 - min(fit.lam, 1.0), fit


# --- trajectories ----------------------------------------------------------

def _n_bins(seconds, bin_width, name):
    k = seconds / bin_width
    kr = int(round(k))
    if kr < 1 or abs(k - kr) > 1e-6:
        raise BadConfig(f"{name}={seconds} is not a positive multiple of bin_width={bin_width}")
    return kr


def matrix_trajectory(matrix: ObservableMatrix, sub_len=20.0, sub_stride=1.0,
                      skew="standard", detrend=False) -> List[IndicatorSample]:
    """Indicator samples over rolling sub-windows of a matrix.

    ac1, CV and skewness use the aggregate (column-mean) series; the return
    rate uses the matching sub-matrix. CV is always computed on the raw
    values, since a detrended series has zero mean.
    """
    if not (sub_len > 0) or not (sub_stride > 0):
        raise BadConfig("sub-window length and stride must be positive")
    skew = _normalize_variant(skew)
    bw = matrix.bin_width
    length = _n_bins(sub_len, bw, "sub_len")
    step = _n_bins(sub_stride, bw, "sub_stride")
    values = matrix.values
    ncols = values.shape[1]
    if length > ncols:
        return []
    starts = np.arange(0, ncols - length + 1, step)
    z = values.mean(axis=0)
    V = sliding_window_view(z, length)[starts]
    _, ac1, cv, sk, slope, reasons = _row_stats(V, skew, detrend)

    single_row = values.shape[0] == 1
    samples = []
    for i, s0 in enumerate(starts.tolist()):
        t_mid = matrix.start_t + (s0 + length / 2) * bw
        why = {}
        for name, arr in (("ac1", ac1), ("cv", cv), ("skewness", sk)):
            if reasons[name][i]:
                why[name] = reasons[name][i]

        rr = None
        if length < MIN_RR_COLUMNS:
            why["return_rate"] = TooShort.__name__
        elif single_row:
            if np.isnan(slope[i]):
                why["return_rate"] = DegenerateMatrix.__name__
            else:
                rr = 1.0 - min(abs(float(slope[i])), 1.0)
        else:
            try:
                rr, _ = return_rate(values[:, s0:s0 + length], detrend=detrend)
            except (DegenerateMatrix, IllConditioned, TooShort) as exc:
                why["return_rate"] = exc.reason

        samples.append(IndicatorSample(
            t_mid=float(t_mid),
            return_rate=rr,
            ac1=None if "ac1" in why else float(ac1[i]),
            cv=None if "cv" in why else float(cv[i]),
            skewness=None if "skewness" in why else float(sk[i]),
            null_reasons=why,
        ))
    return samples


def indicator_trajectory(window: Window, sub_len=20.0, sub_stride=1.0, bin_width=0.1,
                         agg="mean", min_samples=10, skew="standard",
                         detrend=False) -> List[IndicatorSample]:
    """Build the window's observable matrix and roll the four indicators over it."""
    if not (sub_len > 0) or sub_len >= window.length:
        raise BadConfig(f"sub_len must be in (0, {window.length}), got {sub_len}")
    if not (sub_stride > 0):
        raise BadConfig(f"sub_stride must be positive, got {sub_stride}")
    matrix = build_observable_matrix(window, bin_width, agg, min_samples)
    return matrix_trajectory(matrix, sub_len, sub_stride, skew, detrend)


def trajectory_arrays(traj: List[IndicatorSample]) -> Dict[str, np.ndarray]:
    """Column view of a trajectory with NaN for nulls."""
    out = {"t_mid": np.array([s.t_mid for s in traj], dtype=np.float64)}
    for name in INDICATORS:
        out[name] = np.array([np.nan if s.value(name) is None else s.value(name) for s in traj],
                             dtype=np.float64)
    return out


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_trajectory_csv(traj: List[IndicatorSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_mid", "return_rate", "ac1", "cv", "skewness", "null_reasons"])
        for s in traj:
            reasons = ";".join(f"{k}:{v}" for k, v in sorted(s.null_reasons.items()))
            w.writerow([_fmt(s.t_mid), _fmt(s.return_rate), _fmt(s.ac1), _fmt(s.cv),
                        _fmt(s.skewness), reasons])


def read_trajectory_csv(path) -> List[IndicatorSample]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            reasons = dict(item.split(":", 1) for item in row["null_reasons"].split(";") if item)
            vals = {k: (float(row[k]) if row[k] != "" else None) for k in INDICATORS}
            out.append(IndicatorSample(float(row["t_mid"]), null_reasons=reasons, **vals))
    return out
