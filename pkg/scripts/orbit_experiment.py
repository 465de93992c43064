#!/usr/bin/env python3
"""Orbit convergence experiment: run the calm-orbit scenario and report the
ring radius, altitude, pointing error and in-FOV statistics over time."""
import argparse
import math
from pathlib import Path

import numpy as np

from airshipsim.metrics import compute_metrics
from airshipsim.orchestrator import run_scenario
from airshipsim.scenario import load_scenario
from airshipsim.telemetry import read_log


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default=str(Path(__file__).parent.parent / "scenarios" / "calm_orbit.toml"))
    ap.add_argument("--duration", type=float, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="runs")
    args = ap.parse_args()

    scenario = load_scenario(args.scenario)
    if args.duration:
        scenario.duration_s = args.duration
    metrics, log_path = run_scenario(scenario, args.out, seed_override=args.seed)
    contents = read_log(log_path)

    subj = {r["t"]: r["data"]["position"] for r in contents.records if r["kind"] == "subject_state"}
    print(f"{'window':>12} {'radius m':>9} {'alt m':>7} {'centering':>9} {'in-FOV':>7}")
    dur = scenario.duration_s
    for t0 in np.arange(0.0, dur, 60.0):
        t1 = min(dur, t0 + 60.0)
        w = compute_metrics(contents.header, contents.records, window=(t0, t1))
        radii = [
            math.hypot(r["data"]["position"][0] - subj[r["t"]][0],
                       r["data"]["position"][1] - subj[r["t"]][1])
            for r in contents.records
            if r["kind"] == "true_state" and t0 * 1e6 <= r["t"] <= t1 * 1e6 and r["t"] in subj
        ]
        alts = [
            r["data"]["position"][2]
            for r in contents.records
            if r["kind"] == "true_state" and t0 * 1e6 <= r["t"] <= t1 * 1e6
        ]
        print(
            f"{t0:5.0f}-{t1:<5.0f} {np.mean(radii):9.1f} {np.mean(alts):7.1f} "
            f"{w.mean_centering_deg:8.2f}° {w.in_fov_fraction:7.3f}"
        )
    print()
    print(metrics.summary())
    print(f"log: {log_path}")


if __name__ == "__main__":
    main()
