#!/usr/bin/env python3
"""Steady-state trim map: throttle vs airspeed, power, current, endurance.

Reproduces the speed-run calibration table; optionally plots the curve.
"""
import argparse

import numpy as np

from airshipsim.dynamics import AirshipParams, endurance_estimate, power_draw


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--plot", action="store_true", help="matplotlib plot")
    ap.add_argument("--efficiency", type=float, default=0.45)
    args = ap.parse_args()

    params = AirshipParams(prop_efficiency=args.efficiency)
    print(f"{'throttle':>8} {'airspeed':>9} {'power W':>8} {'current A':>9} {'endurance':>10}")
    rows = []
    for throttle in np.arange(0.1, 0.81, 0.05):
        v = params.steady_airspeed(throttle)
        p = power_draw(params, throttle, v)
        i = p / params.battery_voltage
        e = endurance_estimate([i], params.battery_capacity_ah)
        rows.append((throttle, v, p, i, e))
        print(f"{throttle:8.2f} {v:9.2f} {p:8.1f} {i:9.2f} {e:9.1f}m")

    if args.plot:
        import matplotlib.pyplot as plt

        t, v, p, _, _ = zip(*rows)
        fig, ax1 = plt.subplots()
        ax1.plot(t, v, "o-", label="airspeed")
        ax1.set_xlabel("throttle")
        ax1.set_ylabel("airspeed m/s")
        ax2 = ax1.twinx()
        ax2.plot(t, p, "s--", color="tab:red", label="power")
        ax2.set_ylabel("electrical power W")
        fig.tight_layout()
        plt.savefig("throttle_speed_curve.png", dpi=120)
        print("saved throttle_speed_curve.png")


if __name__ == "__main__":
    main()
