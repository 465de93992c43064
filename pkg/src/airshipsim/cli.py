"""Command-line entry points: run, replay, metrics, serve."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigurationError
from .metrics import RunMetrics, compute_metrics
from .orchestrator import run_scenario
from .scenario import load_scenario
from .telemetry import read_log, replay as replay_log


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.duration is not None:
        scenario.duration_s = args.duration
    metrics, log_path = run_scenario(
        scenario, args.out, seed_override=args.seed, realtime=args.realtime
    )
    print(metrics.summary())
    print(f"log: {log_path}")
    csv_path = Path(args.out) / "metrics.csv"
    new_file = not csv_path.exists()
    with open(csv_path, "a") as fh:
        if new_file:
            fh.write(RunMetrics.csv_header() + "\n")
        fh.write(metrics.csv_row() + "\n")
    print(f"metrics: {csv_path}")
    return 0


def _cmd_replay(args) -> int:
    if args.serve:
        from .station import serve_replay

        serve_replay(args.log, args.speed, port=args.port)
        return 0
    count = 0
    for rec in replay_log(args.log, speed=args.speed):
        count += 1
        if args.verbose:
            print(json.dumps(rec, sort_keys=True))
    contents = read_log(args.log)
    print(f"replayed {count} records ({contents.warnings} corrupt skipped)")
    return 0


def _cmd_metrics(args) -> int:
    contents = read_log(args.log)
    metrics = compute_metrics(contents.header, contents.records, contents.warnings)
    print(metrics.summary())
    if args.csv:
        print(RunMetrics.csv_header())
        print(metrics.csv_row())
    return 0


def _cmd_serve(args) -> int:
    from .station import serve_scenario

    try:
        scenario = load_scenario(args.scenario)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    serve_scenario(scenario, port=args.port, token=args.token)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="airshipsim",
        description="Deterministic airship-formation simulator and ground station",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario headless")
    p.add_argument("--scenario", required=True, help="scenario TOML file")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--duration", type=float, default=None, help="duration override, s")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--realtime", action="store_true", help="pace to wall clock")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="re-emit a telemetry log")
    p.add_argument("--log", required=True)
    p.add_argument("--speed", type=float, default=0.0, help="0 = as fast as possible")
    p.add_argument("--serve", action="store_true", help="feed the station UI")
    p.add_argument("--port", type=int, default=int(os.environ.get("STATION_PORT", 8750)))
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("metrics", help="recompute metrics from a log")
    p.add_argument("--log", required=True)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("serve", help="run a live sim with the operator station")
    p.add_argument("--scenario", required=True)
    p.add_argument("--port", type=int, default=int(os.environ.get("STATION_PORT", 8750)))
    p.add_argument("--token", default=os.environ.get("STATION_TOKEN", ""))
    p.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
