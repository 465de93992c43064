"""Run metrics: pure aggregation over a telemetry record stream."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .dynamics import endurance_estimate


@dataclass
class RunMetrics:
    duration_s: float = 0.0
    n_vehicles: int = 0
    in_fov_fraction: float = 0.0
    mean_centering_deg: float = float("nan")
    p95_centering_deg: float = float("nan")
    separation_rmse_deg: float = float("nan")
    min_inter_vehicle_m: float = float("nan")
    min_subject_horizontal_m: float = float("nan")
    geofence_max_excursion_m: float = 0.0
    energy_used_wh: float = 0.0
    endurance_min: float = float("inf")
    partial: bool = False
    warnings: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> str:
        vals = self.to_dict()
        return ",".join(str(vals[k]) for k in sorted(vals))

    @staticmethod
    def csv_header() -> str:
        return ",".join(sorted(asdict(RunMetrics())))

    def summary(self) -> str:
        e = "unlimited" if math.isinf(self.endurance_min) else f"{self.endurance_min:.1f} min"
        lines = [
            f"duration            {self.duration_s:.1f} s   vehicles {self.n_vehicles}",
            f"in-FOV fraction     {self.in_fov_fraction:.3f}",
            f"centering error     mean {self.mean_centering_deg:.2f} deg   p95 {self.p95_centering_deg:.2f} deg",
            f"separation RMSE     {self.separation_rmse_deg:.2f} deg",
            f"min distances       vehicle-vehicle {self.min_inter_vehicle_m:.1f} m   subject {self.min_subject_horizontal_m:.1f} m",
            f"geofence excursion  {self.geofence_max_excursion_m:.2f} m",
            f"energy              {self.energy_used_wh:.2f} Wh   endurance {e}",
        ]
        if self.partial:
            lines.append("NOTE: run ended on a fault; metrics are partial")
        return "\n".join(lines)


def _excursion(p, lo, hi) -> float:
    d = 0.0
    for i in range(3):
        d = max(d, lo[i] - p[i], p[i] - hi[i])
    return max(0.0, d)


def compute_metrics(header: dict, records: list[dict], warnings: int = 0,
                    window: tuple[float, float] | None = None) -> RunMetrics:
    """Aggregate a record stream (optionally restricted to a time window)."""
    m = RunMetrics(warnings=warnings)
    m.n_vehicles = int(header.get("n_vehicles", 0))
    box = header.get("skybox")
    lo = box["min_corner"] if box else None
    hi = box["max_corner"] if box else None

    t0 = window[0] if window else -math.inf
    t1 = window[1] if window else math.inf

    in_fov: list[bool] = []
    centering: list[float] = []
    subject_dists: list[float] = []
    positions_by_time: dict[int, dict[int, np.ndarray]] = {}
    azimuths_by_time: dict[int, dict[int, float]] = {}
    power_samples: dict[int, list[tuple[float, float, float]]] = {}
    last_t = 0
    fault = False
    saw_end = False

    for rec in records:
        t_us = rec["t"]
        last_t = max(last_t, t_us)
        t_s = t_us / 1e6
        kind = rec["kind"]
        data = rec["data"]
        if kind == "event":  # end/fault markers count regardless of window
            if data.get("name") == "integration_fault":
                fault = True
            elif data.get("name") == "run_end":
                saw_end = True
            continue
        if not t0 <= t_s <= t1:
            continue
        if kind == "perception":
            in_fov.append(bool(data["in_fov"]))
            centering.append(float(data["centering_deg"]))
            subject_dists.append(float(data["subject_horizontal_m"]))
            azimuths_by_time.setdefault(t_us, {})[rec["vehicle"]] = float(data["azimuth_deg"])
        elif kind == "true_state":
            p = np.asarray(data["position"])
            positions_by_time.setdefault(t_us, {})[rec["vehicle"]] = p
            if lo is not None:
                m.geofence_max_excursion_m = max(
                    m.geofence_max_excursion_m, _excursion(p, lo, hi)
                )
        elif kind == "power":
            power_samples.setdefault(rec["vehicle"], []).append(
                (t_s, float(data["power_w"]), float(data["current_a"]))
            )
    m.duration_s = last_t / 1e6
    m.partial = fault or not saw_end
    if in_fov:
        m.in_fov_fraction = sum(in_fov) / len(in_fov)
    if centering:
        m.mean_centering_deg = float(np.mean(centering))
        m.p95_centering_deg = float(np.percentile(centering, 95))
    if subject_dists:
        m.min_subject_horizontal_m = min(subject_dists)

    if m.n_vehicles >= 2:
        gap_errors: list[float] = []
        min_pair = math.inf
        target = 360.0 / m.n_vehicles
        for t_us, vs in positions_by_time.items():
            ps = [vs[k] for k in sorted(vs)]
            for i in range(len(ps)):
                for j in range(i + 1, len(ps)):
                    min_pair = min(min_pair, float(np.linalg.norm(ps[i] - ps[j])))
        for t_us, az in azimuths_by_time.items():
            if len(az) < m.n_vehicles:
                continue
            angles = sorted(az[k] for k in sorted(az))
            gaps = [angles[i + 1] - angles[i] for i in range(len(angles) - 1)]
            gaps.append(angles[0] + 360.0 - angles[-1])
            gap_errors.extend((g - target) for g in gaps)
        if gap_errors:
            m.separation_rmse_deg = float(np.sqrt(np.mean(np.square(gap_errors))))
        if math.isfinite(min_pair):
            m.min_inter_vehicle_m = min_pair

    total_energy = 0.0
    endurances = []
    for vehicle, samples in power_samples.items():
        if len(samples) >= 2:
            ts = np.array([s[0] for s in samples])
            pw = np.array([s[1] for s in samples])
            total_energy += float(np.trapezoid(pw, ts)) / 3600.0
        currents = [s[2] for s in samples]
        if currents:
            cap = header.get("battery_capacity_ah", 10.0)
            endurances.append(endurance_estimate(currents, cap))
    m.energy_used_wh = total_energy
    if endurances:
        m.endurance_min = min(endurances)
    return m
