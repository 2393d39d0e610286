"""Trend statistics, precursor verdicts and whole-trace analysis reports."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .exceptions import BadConfig, EWSError, TooFewValid
from .indicators import INDICATORS, IndicatorSample, indicator_trajectory, _normalize_variant
from .ingest import PacketTrace
from .timeseries import Window, normalize_agg, segment_windows

PRECURSOR = "Precursor"
NO_PRECURSOR = "NoPrecursor"
INCONCLUSIVE = "Inconclusive"
LABELS = (PRECURSOR, NO_PRECURSOR, INCONCLUSIVE)

# expected direction of each indicator ahead of a critical transition
SIGNATURE = {"return_rate": -1, "ac1": +1, "cv": +1, "skewness": +1}
SHORT = {"return_rate": "rr", "ac1": "ac1", "cv": "cv", "skewness": "skew"}


def kendall_tau(values) -> float:
    """Kendall tau-a of the values against their position.

    ``(concordant - discordant) / C(n, 2)``; tied pairs count zero. Needs at
    least three values.
    """
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    if n < 3:
        raise TooFewValid(f"need at least 3 values, got {n}")
    s = np.sign(v[None, :] - v[:, None])
    return float(np.triu(s, 1).sum() / (n * (n - 1) / 2))


@dataclass
class TrendStats:
    tau_rr: Optional[float] = None
    tau_ac1: Optional[float] = None
    tau_cv: Optional[float] = None
    tau_skew: Optional[float] = None
    valid_fraction: Dict[str, float] = field(default_factory=dict)
    null_reasons: Dict[str, str] = field(default_factory=dict)

    def tau(self, indicator: str) -> Optional[float]:
        return getattr(self, "tau_" + SHORT[indicator])

    def taus(self) -> Dict[str, Optional[float]]:
        return {SHORT[k]: self.tau(k) for k in INDICATORS}


@dataclass
class PrecursorVerdict:
    label: str
    trend: TrendStats
    window_index: int = -1
    explanation: str = ""


def trend_stats(traj: List[IndicatorSample], suffix: Optional[int] = None) -> TrendStats:
    """Kendall tau of each indicator over the non-null samples."""
    if suffix is not None:
        traj = traj[-suffix:]
    total = len(traj)
    stats = TrendStats()
    for name in INDICATORS:
        vals = [s.value(name) for s in traj if s.value(name) is not None]
        stats.valid_fraction[SHORT[name]] = len(vals) / total if total else 0.0
        try:
            tau = kendall_tau(vals)
        except TooFewValid as exc:
            tau = None
            stats.null_reasons[SHORT[name]] = exc.reason
        setattr(stats, "tau_" + SHORT[name], tau)
    return stats


def verdict_from_trend(trend: TrendStats, tau_min=0.5, min_valid=0.6) -> PrecursorVerdict:
    """Three-way decision on a set of indicator trends.

    Precursor needs every indicator moving the expected way by at least
    ``tau_min`` with enough valid samples. NoPrecursor needs at least one
    indicator moving the opposite way by at least ``tau_min``. Anything else
    is Inconclusive.
    """
    missing = [SHORT[k] for k in INDICATORS if trend.tau(k) is None]
    if missing:
        return PrecursorVerdict(INCONCLUSIVE, trend,
                                explanation="no trend for " + ", ".join(missing))

    signed = {k: SIGNATURE[k] * trend.tau(k) for k in INDICATORS}
    opposite = [SHORT[k] for k in INDICATORS if signed[k] <= -tau_min]
    if opposite:
        return PrecursorVerdict(NO_PRECURSOR, trend,
                                explanation="against signature: " + ", ".join(opposite))

    sparse = [SHORT[k] for k in INDICATORS
              if trend.valid_fraction.get(SHORT[k], 0.0) < min_valid]
    if sparse:
        return PrecursorVerdict(INCONCLUSIVE, trend,
                                explanation="too few valid samples: " + ", ".join(sparse))
    weak = [SHORT[k] for k in INDICATORS if signed[k] < tau_min]
    if weak:
        return PrecursorVerdict(INCONCLUSIVE, trend,
                                explanation="below tau_min: " + ", ".join(weak))
    return PrecursorVerdict(PRECURSOR, trend,
                            explanation="rr down, ac1 up, cv up, skew up")


def classify_precursor(traj: List[IndicatorSample], tau_min=0.5, min_valid=0.6,
                       suffix: Optional[int] = None) -> PrecursorVerdict:
    if not traj:
        return PrecursorVerdict(INCONCLUSIVE, TrendStats(), explanation="empty trajectory")
    return verdict_from_trend(trend_stats(traj, suffix), tau_min, min_valid)


# --- whole-trace analysis -------------------------------------------------

@dataclass(frozen=True)
class AnalysisConfig:
    window_len: float = 60.0
    stride: float = 60.0
    sub_len: float = 20.0
    sub_stride: float = 1.0
    bin_width: float = 0.1
    agg: str = "mean"
    min_samples: int = 10
    skew: str = "standard"
    detrend: bool = False
    tau_min: float = 0.5
    min_valid: float = 0.6
    suffix: Optional[int] = None

    def validate(self) -> "AnalysisConfig":
        for name in ("window_len", "stride", "sub_len", "sub_stride", "bin_width"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise BadConfig(f"{name} must be a positive number, got {value!r}")
        if self.stride > self.window_len:
            raise BadConfig("stride must not exceed window_len")
        if self.sub_len >= self.window_len:
            raise BadConfig("sub_len must be shorter than window_len")
        if not 0 < self.tau_min <= 1:
            raise BadConfig("tau_min must be in (0, 1]")
        if not 0 <= self.min_valid <= 1:
            raise BadConfig("min_valid must be in [0, 1]")
        if self.min_samples < 1:
            raise BadConfig("min_samples must be at least 1")
        if self.suffix is not None and self.suffix < 3:
            raise BadConfig("suffix must be at least 3 samples")
        normalize_agg(self.agg)
        _normalize_variant(self.skew)
        return self

    def as_dict(self):
        return asdict(self)


@dataclass
class WindowResult:
    window: Window
    verdict: Optional[PrecursorVerdict] = None
    trajectory: List[IndicatorSample] = field(default_factory=list)
    skip_reason: Optional[str] = None


@dataclass
class AnalysisReport:
    meta: dict
    config: dict
    verdicts: List[PrecursorVerdict]
    skipped: List[dict]
    windows: List[Window] = field(default_factory=list, repr=False)
    trajectories: Dict[int, List[IndicatorSample]] = field(default_factory=dict, repr=False)

    @property
    def labels(self) -> Dict[int, str]:
        return {v.window_index: v.label for v in self.verdicts}

    def precursor_windows(self) -> List[int]:
        return [v.window_index for v in self.verdicts if v.label == PRECURSOR]

    def to_dict(self) -> dict:
        by_index = {w.index: w for w in self.windows}
        rows = []
        for v in self.verdicts:
            w = by_index.get(v.window_index)
            rows.append({
                "index": v.window_index,
                "start_t": None if w is None else w.start_t,
                "end_t": None if w is None else w.end_t,
                "partial": None if w is None else w.partial,
                "n_records": None if w is None else len(w),
                "label": v.label,
                "tau": v.trend.taus(),
                "valid_fraction": dict(v.trend.valid_fraction),
                "explanation": v.explanation,
            })
        return {"meta": self.meta, "config": self.config, "windows": rows,
                "skipped": self.skipped}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def analyze_window(window: Window, cfg: AnalysisConfig) -> WindowResult:
    try:
        traj = indicator_trajectory(window, cfg.sub_len, cfg.sub_stride, cfg.bin_width,
                                    cfg.agg, cfg.min_samples, cfg.skew, cfg.detrend)
    except BadConfig:
        raise
    except EWSError as exc:
        return WindowResult(window, skip_reason=f"{type(exc).__name__}: {exc}")
    if not traj:
        return WindowResult(window, skip_reason="NoSubWindows: window shorter than sub_len")
    verdict = classify_precursor(traj, cfg.tau_min, cfg.min_valid, cfg.suffix)
    verdict.window_index = window.index
    return WindowResult(window, verdict, traj)


def analyze_trace(trace: PacketTrace, cfg: AnalysisConfig = None, n_jobs: int = 1,
                  keep_trajectories: bool = True) -> AnalysisReport:
    """Segment, compute indicator trajectories, and classify every window.

    Per-window failures become ``skipped`` entries. The output only depends
    on ``trace`` and ``cfg``; ``meta['generated_at']`` is the one
    wall-clock field.
    """
    cfg = (cfg or AnalysisConfig()).validate()
    windows = segment_windows(trace, cfg.window_len, cfg.stride)

    if n_jobs != 1 and len(windows) > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(analyze_window)(w, cfg) for w in windows)
    else:
        results = [analyze_window(w, cfg) for w in windows]

    verdicts, skipped, trajectories = [], [], {}
    for res in results:
        if res.verdict is None:
            skipped.append({"index": res.window.index, "start_t": res.window.start_t,
                            "reason": res.skip_reason})
        else:
            verdicts.append(res.verdict)
            if keep_trajectories:
                trajectories[res.window.index] = res.trajectory

    meta = {
        "tool": "ddos_ews",
        "version": __version__,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "n_records": len(trace),
        "trace_end": trace.end_time,
        "n_windows": len(windows),
        "n_precursor": sum(v.label == PRECURSOR for v in verdicts),
    }
    for key in ("source", "format", "ingest", "synth"):
        if key in trace.meta:
            meta[key] = trace.meta[key]
    return AnalysisReport(meta, cfg.as_dict(), verdicts, skipped, windows, trajectories)


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not {"meta", "config", "windows", "skipped"} <= set(data):
        raise ValueError("not an analysis report: missing top-level keys")
    return data


CONFIG_FIELDS = tuple(f.name for f in fields(AnalysisConfig))
