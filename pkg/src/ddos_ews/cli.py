"""Command-line front end: ``ddos-ews analyze | generate | report``.

Exit codes: 0 success, 1 fatal error, 2 (analyze only) at least one window
was labelled Precursor.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .detector import PRECURSOR, AnalysisConfig, analyze_trace, load_report
from .exceptions import EWSError
from .indicators import write_trajectory_csv
from .ingest import read_trace, write_csv
from .svg import write_trajectory_svg
from .synth import PRESETS, dump_scenario, generate_scenario, load_scenario, preset

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PRECURSOR = 2


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="ddos-ews", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="compute indicators and precursor verdicts for a trace")
    a.add_argument("--input", "-i", required=True, action="append",
                   help="pcap or CSV trace; repeat for several")
    a.add_argument("--format", choices=("pcap", "csv"), help="input format (default: by suffix)")
    a.add_argument("--window-len", type=_positive, default=60.0)
    a.add_argument("--stride", type=_positive, help="window stride (default: window length)")
    a.add_argument("--sub-len", type=_positive, default=20.0)
    a.add_argument("--sub-stride", type=_positive, default=1.0)
    a.add_argument("--bin-width", type=_positive, default=0.1)
    a.add_argument("--agg", choices=("mean", "sum", "max", "count"), default="mean")
    a.add_argument("--skew", choices=("standard", "sqrt-m2"), default="standard")
    a.add_argument("--min-samples", type=int, default=10)
    a.add_argument("--tau-min", type=float, default=0.5)
    a.add_argument("--min-valid", type=float, default=0.6)
    a.add_argument("--suffix", type=int, help="trend over the last N samples only")
    a.add_argument("--detrend", action="store_true", help="linear detrend per sub-window")
    a.add_argument("--dest", type=int, action="append",
                   help="keep only this destination id (pcap; repeatable)")
    a.add_argument("--both-directions", action="store_true",
                   help="also keep packets sent by the monitored destinations (pcap)")
    a.add_argument("--plots", action="store_true", help="write one SVG per analysed window")
    a.add_argument("--out-dir", default="ews_out")
    a.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    a.add_argument("--seed", type=int, help=argparse.SUPPRESS)

    g = sub.add_parser("generate", help="write a synthetic trace CSV")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="scenario JSON file")
    src.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--out", "-o", required=True, help="output CSV path")
    g.add_argument("--seed", type=int, help="override the scenario seed")
    g.add_argument("--write-spec", help="also write the effective scenario JSON here")

    r = sub.add_parser("report", help="print a summary table of a report.json")
    r.add_argument("report")
    return parser


def _window_name(index):
    return f"window_{index:04d}"


def _analyze_one(path, args, cfg, out_dir: Path):
    kwargs = {}
    fmt = args.format or ("csv" if str(path).lower().endswith(".csv") else "pcap")
    if fmt == "pcap":
        kwargs = {"dest_filter": args.dest, "both_directions": args.both_directions}
    trace = read_trace(path, fmt, **kwargs)
    report = analyze_trace(trace, cfg, n_jobs=max(1, args.jobs))
    report.config.update({
        "format": fmt,
        "dest_filter": sorted(args.dest) if args.dest else None,
        "both_directions": args.both_directions,
        "jobs": max(1, args.jobs),
    })

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    ind_dir = out_dir / "indicators"
    ind_dir.mkdir(exist_ok=True)
    labels = report.labels
    for index, traj in sorted(report.trajectories.items()):
        write_trajectory_csv(traj, ind_dir / f"{_window_name(index)}.csv")
        if args.plots:
            plot_dir = out_dir / "plots"
            plot_dir.mkdir(exist_ok=True)
            write_trajectory_svg(traj, plot_dir / f"{_window_name(index)}.svg",
                                 title=f"{Path(path).name}: window {index}",
                                 subtitle=labels.get(index, ""))
    n_pre = len(report.precursor_windows())
    print(f"{path}: {len(report.windows)} windows, {len(report.verdicts)} analyzed, "
          f"{len(report.skipped)} skipped, {n_pre} Precursor -> {out_dir / 'report.json'}")
    return n_pre


def cmd_analyze(args):
    cfg = AnalysisConfig(
        window_len=args.window_len,
        stride=args.stride if args.stride is not None else args.window_len,
        sub_len=args.sub_len,
        sub_stride=args.sub_stride,
        bin_width=args.bin_width,
        agg=args.agg,
        min_samples=args.min_samples,
        skew=args.skew,
        detrend=args.detrend,
        tau_min=args.tau_min,
        min_valid=args.min_valid,
        suffix=args.suffix,
    ).validate()
    out_root = Path(args.out_dir)
    found = 0
    for path in args.input:
        if not Path(path).is_file():
            raise EWSError(f"input not found: {path}")
    for path in args.input:
        out_dir = out_root if len(args.input) == 1 else out_root / Path(path).stem
        found += _analyze_one(path, args, cfg, out_dir)
    return EXIT_PRECURSOR if found else EXIT_OK


def cmd_generate(args):
    spec = load_scenario(args.spec) if args.spec else preset(args.preset)
    trace = generate_scenario(spec, seed=args.seed)
    write_csv(trace, args.out)
    if args.write_spec:
        effective = spec if args.seed is None else replace(spec, seed=args.seed)
        dump_scenario(effective, args.write_spec)
    print(f"wrote {len(trace)} records, duration {spec.duration_s:g} s, "
          f"seed {trace.meta['synth']['seed']} -> {args.out}")
    for start, phase in zip(spec.phase_starts(), spec.phases):
        print(f"  {start:8.1f} s  {phase.kind:<14} {phase.duration_s:g} s")
    return EXIT_OK


def _tau_cell(v):
    return "     -" if v is None else f"{v:+.3f}"


def cmd_report(args):
    data = load_report(args.report)
    rows = sorted(data["windows"], key=lambda w: w["index"])
    if rows:
        print(f"{'index':>5} {'start_t':>9} {'label':<13} {'rr':>6} {'ac1':>6} {'cv':>6} {'skew':>6}")
    for w in rows:
        tau = w.get("tau", {})
        start = w.get("start_t")
        start_txt = "-" if start is None else f"{start:.1f}"
        print(f"{w['index']:>5} {start_txt:>9} {w['label']:<13} "
              + " ".join(_tau_cell(tau.get(k)) for k in ("rr", "ac1", "cv", "skew")))
    n_pre = sum(w["label"] == PRECURSOR for w in rows)
    print(f"{len(rows)} windows analyzed, {len(data['skipped'])} skipped, {n_pre} Precursor")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "generate": cmd_generate, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (EWSError, OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"ddos-ews {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
