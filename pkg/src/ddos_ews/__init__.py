"""Early-warning indicators of volumetric DDoS attacks from packet traces."""

__version__ = "0.1.0"

from .exceptions import *  # noqa: E402,F401,F403
from .ingest import PacketRecord, PacketTrace, map_destination, read_csv, read_pcap, write_csv  # noqa: E402
from .timeseries import (  # noqa: E402
    ObservableMatrix,
    Window,
    WindowSeries,
    build_observable_matrix,
    extract_series,
    segment_windows,
)
from .indicators import (  # noqa: E402
    IndicatorSample,
    coefficient_of_variation,
    indicator_trajectory,
    lag1_autocorrelation,
    return_rate,
    skewness,
    summary_stats,
)
from .detector import (  # noqa: E402
    AnalysisConfig,
    AnalysisReport,
    PrecursorVerdict,
    TrendStats,
    analyze_trace,
    classify_precursor,
    kendall_tau,
)
from .synth import (  # noqa: E402
    PhaseSpec,
    ScenarioSpec,
    baseline_scenario,
    canonical_scenario,
    generate_scenario,
    kickoff_scenario,
)
from .estimators import LeadingIndicators, PrecursorDetector  # noqa: E402
