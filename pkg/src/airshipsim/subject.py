"""Ground-subject motion: grazing jitter, waypoint walking, scripted playback."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

SPEED_CAPS = {"graze": 0.3, "walk": 1.5, "trot": 4.0}


@dataclass
class SubjectState:
    position: np.ndarray  # (x, y, 0)
    velocity: np.ndarray  # 2-D ground velocity
    behavior: str = "graze"


@dataclass
class SubjectConfig:
    behavior: str = "graze"
    start: tuple[float, float] = (0.0, 0.0)
    graze_jitter_std: float = 0.05  # m/s OU accel-scale jitter
    graze_anchor_drift: float = 0.02  # m/s slow anchor wander
    wander_radius: float = 80.0  # waypoint draw radius for walk/trot
    waypoint_capture: float = 2.0
    heading_wander_std: float = 0.4  # rad, meander about the waypoint bearing
    heading_wander_tau: float = 3.0
    script_path: str | None = None
    speed_override: float | None = None


def load_script(path: str) -> list[tuple[float, float, float]]:
    """Scripted trajectory CSV: time_s, x_m, y_m with strictly increasing time."""
    rows: list[tuple[float, float, float]] = []
    with open(path, newline="") as fh:
        for raw in csv.reader(fh):
            if not raw or raw[0].strip().startswith("#") or raw[0].strip() == "time_s":
                continue
            rows.append((float(raw[0]), float(raw[1]), float(raw[2])))
    for a, b in zip(rows, rows[1:]):
        if b[0] <= a[0]:
            raise ValueError("script times must be strictly increasing")
    if not rows:
        raise ValueError(f"empty subject script: {path}")
    return rows


class SubjectModel:
    """Single ground subject; emits an exhaustion event once a script ends."""

    def __init__(self, config: SubjectConfig, rng: np.random.Generator,
                 script: list[tuple[float, float, float]] | None = None):
        self.config = config
        self.rng = rng
        self.behavior = config.behavior
        self.state = SubjectState(
            position=np.array([config.start[0], config.start[1], 0.0]),
            velocity=np.zeros(2),
            behavior=config.behavior,
        )
        self.time = 0.0
        self.anchor = np.array(config.start, dtype=float)
        self.waypoint: np.ndarray | None = None
        self._wander = 0.0
        self.script = script
        if config.script_path and script is None:
            self.script = load_script(config.script_path)
        self.script_exhausted = False
        self._exhaust_reported = False

    @property
    def speed_cap(self) -> float:
        if self.config.speed_override is not None:
            return self.config.speed_override
        return SPEED_CAPS.get(self.behavior, 1.5)

    def step(self, dt: float) -> list[dict]:
        """Advance by dt; returns any events (script exhaustion)."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.time += dt
        events: list[dict] = []
        if self.behavior == "scripted":
            self._step_scripted(events)
        elif self.behavior == "graze":
            self._step_graze(dt)
        else:
            self._step_waypoint(dt)
        self.state.position[2] = 0.0
        return events

    def _step_scripted(self, events: list[dict]):
        assert self.script is not None
        t = self.time
        rows = self.script
        if t >= rows[-1][0]:
            self.state.position[0], self.state.position[1] = rows[-1][1], rows[-1][2]
            self.state.velocity[:] = 0.0
            if not self._exhaust_reported:
                self._exhaust_reported = True
                self.script_exhausted = True
                events.append({"event": "subject_script_exhausted", "time": t})
            return
        lo = 0
        while rows[lo + 1][0] < t:
            lo += 1
        t0, x0, y0 = rows[lo]
        t1, x1, y1 = rows[lo + 1]
        a = (t - t0) / (t1 - t0) if t > t0 else 0.0
        self.state.position[0] = x0 + a * (x1 - x0)
        self.state.position[1] = y0 + a * (y1 - y0)
        self.state.velocity[0] = (x1 - x0) / (t1 - t0)
        self.state.velocity[1] = (y1 - y0) / (t1 - t0)

    def _step_graze(self, dt: float):
        cfg = self.config
        if cfg.graze_anchor_drift > 0:
            self.anchor += self.rng.normal(0.0, cfg.graze_anchor_drift * math.sqrt(dt), 2)
        v = self.state.velocity
        if cfg.graze_jitter_std > 0:
            v += self.rng.normal(0.0, cfg.graze_jitter_std * math.sqrt(dt), 2)
        v += 0.2 * dt * (self.anchor - self.state.position[:2])  # pull back to anchor
        v *= 1.0 - min(1.0, 0.5 * dt)  # velocity damping keeps the walk tame
        self._apply_cap(v)
        self.state.position[:2] += v * dt

    def _step_waypoint(self, dt: float):
        cfg = self.config
        p = self.state.position[:2]
        if self.waypoint is None or np.linalg.norm(self.waypoint - p) < cfg.waypoint_capture:
            angle = self.rng.uniform(0.0, 2.0 * math.pi)
            radius = self.rng.uniform(0.3, 1.0) * cfg.wander_radius
            self.waypoint = self.anchor + radius * np.array([math.cos(angle), math.sin(angle)])
        to_wp = self.waypoint - p
        dist = float(np.linalg.norm(to_wp))
        # meander about the waypoint bearing (animals do not walk bee-lines)
        tau, std = cfg.heading_wander_tau, cfg.heading_wander_std
        if std > 0:
            a = math.exp(-dt / tau)
            self._wander = a * self._wander + std * math.sqrt(1.0 - a * a) * self.rng.normal()
        bearing = math.atan2(to_wp[1], to_wp[0]) + self._wander
        v = self.state.velocity
        desired = self.speed_cap * np.array([math.cos(bearing), math.sin(bearing)])
        v += (desired - v) * min(1.0, 2.0 * dt)  # smooth heading changes
        self._apply_cap(v)
        self.state.position[:2] += v * dt

    def _apply_cap(self, v: np.ndarray):
        speed = math.hypot(v[0], v[1])
        cap = self.speed_cap
        if speed > cap:
            v *= cap / speed
        self.state.velocity = v
