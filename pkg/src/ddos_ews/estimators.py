"""scikit-learn compatible front ends.

:class:`LeadingIndicators` is a stateless transformer from series to the
four indicator values, so it can sit inside a :class:`sklearn.pipeline.Pipeline`.
:class:`PrecursorDetector` runs the full windowed analysis on a packet trace
and predicts one label per window.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .detector import AnalysisConfig, analyze_trace
from .exceptions import IndicatorUndefined
from .indicators import INDICATORS, SKEW_VARIANTS, _row_stats, fit_ar1
from .validation import check_choice, check_series_matrix, check_trace

SKIPPED = "Skipped"


class LeadingIndicators(TransformerMixin, BaseEstimator):
    """Map each row of ``X`` (one series) to return rate, ac1, CV and skewness.

    Undefined values come out as NaN.
    """

    def __init__(self, skew="standard", detrend=False):
        self.skew = skew
        self.detrend = detrend

    def fit(self, X, y=None):
        check_choice("skew", self.skew, SKEW_VARIANTS)
        X = check_series_matrix(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_series_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        _, ac1, cv, sk, _, _ = _row_stats(X, self.skew, self.detrend)
        rr = np.full(len(X), np.nan)
        for i, row in enumerate(X):
            try:
                rr[i] = 1.0 - min(fit_ar1(row, detrend=self.detrend).lam, 1.0)
            except IndicatorUndefined:
                pass
        return np.column_stack([rr, ac1, cv, sk])

    def get_feature_names_out(self, input_features=None):
        return np.array(INDICATORS, dtype=object)


class PrecursorDetector(BaseEstimator):
    """Windowed early-warning classifier for packet traces.

    ``fit`` analyses a trace and stores the result in ``report_``;
    ``predict`` returns one label per window (``"Precursor"``,
    ``"NoPrecursor"``, ``"Inconclusive"``, or ``"Skipped"`` when the window
    could not be analysed).
    """

    def __init__(self, window_len=60.0, stride=60.0, sub_len=20.0, sub_stride=1.0,
                 bin_width=0.1, agg="mean", min_samples=10, skew="standard",
                 detrend=False, tau_min=0.5, min_valid=0.6, suffix=None, n_jobs=1):
        self.window_len = window_len
        self.stride = stride
        self.sub_len = sub_len
        self.sub_stride = sub_stride
        self.bin_width = bin_width
        self.agg = agg
        self.min_samples = min_samples
        self.skew = skew
        self.detrend = detrend
        self.tau_min = tau_min
        self.min_valid = min_valid
        self.suffix = suffix
        self.n_jobs = n_jobs

    def _config(self) -> AnalysisConfig:
        params = self.get_params()
        params.pop("n_jobs")
        return AnalysisConfig(**params).validate()

    def _labels(self, report):
        labels = report.labels
        return np.array([labels.get(w.index, SKIPPED) for w in report.windows], dtype=object)

    def fit(self, X, y=None):
        report = analyze_trace(check_trace(X), self._config(), n_jobs=self.n_jobs)
        self.report_ = report
        self.labels_ = self._labels(report)
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        return self._labels(analyze_trace(check_trace(X), self._config(), n_jobs=self.n_jobs))

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def precursor_windows(self):
        check_is_fitted(self, "report_")
        return self.report_.precursor_windows()
