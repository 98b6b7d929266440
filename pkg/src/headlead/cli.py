"""Command-line entry point: analyze, simulate, stream, report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .config import ConfigError, load_scene_config
from .events import EventDetectionError
from .ingest import ParseError, parse_session
from .pipeline import analyze_session, format_event_record, signals_csv
from .signals import NoSignalError, TargetUnresolvable
from .sim import make_benchmark
from .stats import aggregate, render_report
from .stream import StreamAnalyzer

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _load_config(path, stderr) -> "SceneConfig | None":
    try:
        return load_scene_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return None


def cmd_analyze(args, stdout, stderr) -> int:
    scene = _load_config(args.config, stderr)
    if scene is None:
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)

    all_results = []
    failures = []
    for path in args.sessions:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                session = parse_session(fh)
            analyses = analyze_session(session, scene)
        except (OSError, ParseError, TargetUnresolvable, NoSignalError, EventDetectionError) as exc:
            failures.append((path, str(exc)))
            print(f"{path}: {exc}", file=stderr)
            continue
        sid = session.session_id
        with open(os.path.join(args.out, f"{sid}.events.jsonl"), "w", encoding="utf-8") as fh:
            for analysis in analyses:
                fh.write(format_event_record(analysis.result) + "\n")
        for analysis in analyses:
            csv_name = f"{sid}.{analysis.result.phase}.signals.csv"
            with open(os.path.join(args.out, csv_name), "w", encoding="utf-8") as fh:
                fh.write(signals_csv(analysis, session.fps))
        all_results.extend(a.result for a in analyses)

    if all_results:
        summaries = aggregate(all_results)
        with open(os.path.join(args.out, "report.csv"), "w", encoding="utf-8") as fh:
            fh.write(render_report(summaries, "csv"))
        with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(render_report(summaries, "text"))

    if failures:
        print(f"{len(failures)} of {len(args.sessions)} sessions failed", file=stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_simulate(args, stdout, stderr) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    if not isinstance(doc, dict):
        print("config error: simulate config must be a JSON object", file=stderr)
        return EXIT_CONFIG
    try:
        manifest = make_benchmark(
            args.out,
            n_per_action=int(doc.get("n_per_action", 32)),
            lead_range=tuple(doc.get("lead_range", (0.3, 0.7))),
            seed=int(doc.get("seed", 0)),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            dropout_rate=float(doc.get("dropout_rate", 0.0)),
            fps=float(doc.get("fps", 30.0)),
        )
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    print(f"wrote {len(manifest)} sessions to {args.out}", file=stdout)
    return EXIT_OK


def cmd_stream(args, stdin, stdout, stderr) -> int:
    scene = _load_config(args.config, stderr)
    if scene is None:
        return EXIT_CONFIG
    try:
        analyzer = StreamAnalyzer(
            scene,
            on_event=lambda line: (stdout.write(line + "\n"), stdout.flush()),
            on_diagnostic=lambda msg: print(msg, file=stderr),
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    for line in stdin:
        analyzer.feed_line(line)
    analyzer.finalize()
    return EXIT_PARTIAL if analyzer.line_errors else EXIT_OK


def cmd_report(args, stdout, stderr) -> int:
    @dataclass
    class _Row:
        action_label: str
        phase: str
        anticipation_seconds: float

    rows = []
    try:
        names = sorted(os.listdir(args.indir))
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG
    for name in names:
        if not name.endswith(".events.jsonl"):
            continue
        with open(os.path.join(args.indir, name), "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                rows.append(_Row(rec["action_label"], rec["phase"], rec["anticipation_seconds"]))
    if not rows:
        print("no event records found", file=stderr)
        return EXIT_PARTIAL
    stdout.write(render_report(aggregate(rows), args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headlead",
        description="Detect how far head orientation anticipates reach and transport goals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze session files and write event records")
    p.add_argument("--config", required=True, help="SceneConfig JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("sessions", nargs="+", help="session .jsonl files")

    p = sub.add_parser("simulate", help="generate a synthetic benchmark with ground truth")
    p.add_argument("--config", required=True, help="simulation config JSON path")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("stream", help="online analysis of a session stream on stdin")
    p.add_argument("--config", required=True, help="SceneConfig JSON path")

    p = sub.add_parser("report", help="aggregate event records into a table")
    p.add_argument("--in", dest="indir", required=True, help="directory of .events.jsonl files")
    p.add_argument("--format", choices=("text", "csv"), default="text")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stdin, stdout, stderr = sys.stdin, sys.stdout, sys.stderr
    if args.command == "analyze":
        return cmd_analyze(args, stdout, stderr)
    if args.command == "simulate":
        return cmd_simulate(args, stdout, stderr)
    if args.command == "stream":
        return cmd_stream(args, stdin, stdout, stderr)
    if args.command == "report":
        return cmd_report(args, stdout, stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
