#!/usr/bin/env python3
"""Tracking quality vs wind regime: sweep the mean wind speed with gusts
scaled to 20% of it, report in-FOV fraction and pointing error."""
import argparse

from airshipsim.orchestrator import run_scenario
from airshipsim.scenario import EnvironmentSpec, Scenario, VehicleSpec
from airshipsim.subject import SubjectConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--winds", type=float, nargs="+", default=[0.0, 2.0, 4.0, 6.0, 8.0])
    ap.add_argument("--duration", type=float, default=180.0)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="runs/wind_sweep")
    args = ap.parse_args()

    print(f"{'wind m/s':>8} {'in-FOV':>7} {'centering':>9} {'p95':>7} {'energy Wh':>9}")
    for w in args.winds:
        sc = Scenario(
            name=f"sweep_w{w:g}",
            duration_s=args.duration,
            master_seed=args.seed,
            vehicles=[VehicleSpec(start=(60.0, 0.0, 40.0), heading_deg=180.0, airspeed=7.0)],
            environment=EnvironmentSpec(
                mean_wind=(w, 0.0, 0.0),
                gust_std=(0.2 * w, 0.2 * w, 0.07 * w),
                gust_tau=4.0,
            ),
            subject=SubjectConfig(behavior="walk", start=(0.0, 0.0), speed_override=1.0),
        )
        m, _ = run_scenario(sc, args.out)
        print(
            f"{w:8.1f} {m.in_fov_fraction:7.3f} {m.mean_centering_deg:8.2f}° "
            f"{m.p95_centering_deg:6.2f}° {m.energy_used_wh:9.2f}"
        )


if __name__ == "__main__":
    main()
