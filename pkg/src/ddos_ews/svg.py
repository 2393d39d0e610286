"""Dependency-free SVG rendering of indicator trajectories."""
from __future__ import annotations

import math
from typing import List, Sequence

from .indicators import INDICATORS, IndicatorSample

TITLES = {
    "return_rate": "Return rate",
    "ac1": "Lag-1 autocorrelation",
    "cv": "Coefficient of variation",
    "skewness": "Skewness",
}
COLORS = {"return_rate": "#1f77b4", "ac1": "#d62728", "cv": "#2ca02c", "skewness": "#9467bd"}

WIDTH = 720
PANEL_H = 150
MARGIN_L = 80
MARGIN_R = 20
MARGIN_T = 40
GAP = 30


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.3g}"


def _polylines(xs: Sequence[float], ys: Sequence) -> List[List[tuple]]:
    """Split into runs of non-null points so gaps stay visible."""
    runs, cur = [], []
    for x, y in zip(xs, ys):
        if y is None or not math.isfinite(y):
            if cur:
                runs.append(cur)
            cur = []
        else:
            cur.append((x, y))
    if cur:
        runs.append(cur)
    return runs


def trajectory_svg(traj: List[IndicatorSample], title: str = "", subtitle: str = "") -> str:
    """Four stacked panels, one per indicator, against sub-window centre time."""
    height = MARGIN_T + len(INDICATORS) * (PANEL_H + GAP) + 20
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    xs = [s.t_mid for s in traj]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{height}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{_escape(title)}</text>',
    ]
    if subtitle:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="32" text-anchor="middle" '
                   f'fill="#555">{_escape(subtitle)}</text>')

    for k, name in enumerate(INDICATORS):
        top = MARGIN_T + k * (PANEL_H + GAP)
        bottom = top + PANEL_H
        ys = [s.value(name) for s in traj]
        finite = [y for y in ys if y is not None and math.isfinite(y)]
        y0, y1 = (min(finite), max(finite)) if finite else (0.0, 1.0)
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5

        def px(x):
            return MARGIN_L + (x - x0) / (x1 - x0) * plot_w

        def py(y):
            return bottom - (y - y0) / (y1 - y0) * PANEL_H

        out.append(f'<g class="panel" id="{name}">')
        out.append(f'<rect x="{MARGIN_L}" y="{top}" width="{plot_w}" height="{PANEL_H}" '
                   f'fill="none" stroke="#999"/>')
        out.append(f'<text x="{MARGIN_L + 4}" y="{top + 13}">{TITLES[name]}</text>')
        for v in (y0, y1):
            out.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(py(v) + 4)}" text-anchor="end">'
                       f'{_label(v)}</text>')
        for v in (x0, x1):
            out.append(f'<text x="{_fmt(px(v))}" y="{bottom + 14}" text-anchor="middle">'
                       f'{_label(v)}</text>')
        for run in _polylines(xs, ys):
            pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in run)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{COLORS[name]}" '
                       f'stroke-width="1.5"/>')
        missing = len(ys) - len(finite)
        if missing:
            out.append(f'<text x="{WIDTH - MARGIN_R - 4}" y="{top + 13}" text-anchor="end" '
                       f'fill="#a00">{missing} null</text>')
        out.append("</g>")
    out.append(f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{height - 4}" text-anchor="middle">'
               "relative time (s)</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_trajectory_svg(traj, path, title="", subtitle="") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trajectory_svg(traj, title, subtitle))
