"""Cascaded PID flight controller, sky-box geofence guard, waypoint steering.

The cascade maps (airspeed, turn-rate, climb-rate) setpoints to actuators:
airspeed -> throttle (PI plus trim feedforward), turn-rate -> yaw rudder
(PID), climb-rate -> pitch-angle setpoint -> pitch rudder (PI outer, PD
inner). The sky-box guard runs upstream of the cascade and replaces any
setpoints that would carry the vehicle out of the fenced volume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import ActuatorCommand, AirshipParams
from .quat import pitch_of, wrap_angle, yaw_of


class ControlMode(str, Enum):
    MANUAL = "manual"
    RATE = "rate"
    HOLD_POSITION = "hold_position"
    WAYPOINT = "waypoint"
    AUTONOMOUS = "autonomous"


@dataclass
class Setpoints:
    airspeed: float = 6.0
    turn_rate: float = 0.0
    climb_rate: float = 0.0
    mode: ControlMode = ControlMode.RATE


@dataclass
class SkyBox:
    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]
    margin: float = 10.0

    def __post_init__(self):
        for lo, hi in zip(self.min_corner, self.max_corner):
            if hi <= lo:
                raise ValueError("sky-box max corner must exceed min corner per axis")
        if self.margin <= 0:
            raise ValueError("sky-box margin must be positive")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.min_corner) + np.asarray(self.max_corner))

    def excursion(self, p) -> float:
        """Distance outside the box (0 when inside)."""
        d = 0.0
        for i in range(3):
            d = max(d, self.min_corner[i] - p[i], p[i] - self.max_corner[i])
        return max(0.0, d)

    def inside(self, p, shrink: float = 0.0) -> bool:
        return all(
            self.min_corner[i] + shrink <= p[i] <= self.max_corner[i] - shrink
            for i in range(3)
        )


@dataclass
class PidLoop:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    out_min: float = -1.0
    out_max: float = 1.0
    integrator: float = 0.0
    _last_err: float | None = None

    def step(self, err: float, dt: float, rate: float | None = None) -> float:
        """rate, when given, is the measured derivative used for the D term
        (derivative-on-measurement avoids setpoint kick)."""
        if self.ki > 0.0:
            self.integrator += err * dt
            lim = (self.out_max - self.out_min) / self.ki
            self.integrator = min(lim, max(-lim, self.integrator))
        if rate is None:
            d = 0.0 if self._last_err is None else (err - self._last_err) / dt
        else:
            d = -rate
        self._last_err = err
        out = self.kp * err + self.ki * self.integrator + self.kd * d
        return min(self.out_max, max(self.out_min, out))

    def reset(self):
        self.integrator = 0.0
        self._last_err = None


@dataclass
class FcConfig:
    v_min: float = 4.0
    v_max: float = 11.0
    turn_rate_max: float = 0.25
    climb_rate_max: float = 1.5
    pitch_sp_max: float = 0.35  # rad

    airspeed_kp: float = 0.06
    airspeed_ki: float = 0.02
    turn_kp: float = 3.0
    turn_ki: float = 2.0
    turn_kd: float = 0.0  # yaw is airframe-damped; D on a noisy rate only flaps the rudder
    climb_kp: float = 0.25
    climb_ki: float = 0.06
    pitch_kp: float = 4.0
    pitch_kd: float = 6.0

    stale_timeout: float = 0.5
    geofence_lookahead: float = 5.0
    geofence_turn_gain: float = 1.0
    geofence_climb_gain: float = 0.5
    manual_bypasses_geofence: bool = False


def skybox_guard(
    position,
    velocity,
    heading: float,
    sp: Setpoints,
    box: SkyBox,
    cfg: FcConfig,
    wind_estimate=None,
) -> tuple[Setpoints, list[str]]:
    """Containment filter ahead of the cascade.

    Vertical breaches clamp the climb-rate channel; horizontal breaches
    replace the setpoints with a turn toward the box center at low airspeed
    (raised above the wind estimate when one is supplied, otherwise the
    commanded recovery speed cannot make headway upwind).
    """
    events: list[str] = []
    look = cfg.geofence_lookahead
    pred = (
        position[0] + velocity[0] * look,
        position[1] + velocity[1] * look,
        position[2] + velocity[2] * look,
    )
    m = box.margin
    lo, hi = box.min_corner, box.max_corner

    outside_now = not box.inside(position)
    horiz_breach = outside_now or not (
        lo[0] + m <= pred[0] <= hi[0] - m and lo[1] + m <= pred[1] <= hi[1] - m
    )
    below = pred[2] < lo[2] + m
    above = pred[2] > hi[2] - m

    if outside_now:
        events.append("geofence_emergency")
    if not (horiz_breach or below or above):
        return sp, events

    if horiz_breach:
        events.append("geofence_override")
        center = box.center
        bearing = math.atan2(center[1] - position[1], center[0] - position[0])
        turn = cfg.geofence_turn_gain * wrap_angle(bearing - heading)
        v_rec = cfg.v_min
        if wind_estimate is not None:
            w = math.hypot(wind_estimate[0], wind_estimate[1])
            v_rec = max(cfg.v_min, min(cfg.v_max, w + 1.0))
        climb = cfg.geofence_climb_gain * (center[2] - position[2])
        return (
            Setpoints(
                airspeed=v_rec,
                turn_rate=min(cfg.turn_rate_max, max(-cfg.turn_rate_max, turn)),
                climb_rate=min(cfg.climb_rate_max, max(-cfg.climb_rate_max, climb)),
                mode=sp.mode,
            ),
            events,
        )

    # vertical-only breach: clamp the climb channel, keep the rest
    climb = sp.climb_rate
    if above:
        climb = -cfg.geofence_climb_gain * (pred[2] - (hi[2] - m))
        climb = max(-cfg.climb_rate_max, min(climb, -0.2))
        events.append("geofence_ceiling")
    elif below:
        climb = cfg.geofence_climb_gain * ((lo[2] + m) - pred[2])
        climb = min(cfg.climb_rate_max, max(climb, 0.2))
        events.append("geofence_floor")
    return (
        Setpoints(airspeed=sp.airspeed, turn_rate=sp.turn_rate, climb_rate=climb, mode=sp.mode),
        events,
    )


def waypoint_nav(position, heading: float, target, speed: float, cfg: FcConfig) -> Setpoints:
    """Bearing/altitude P-steering toward a world point."""
    bearing = math.atan2(target[1] - position[1], target[0] - position[0])
    turn = 0.8 * wrap_angle(bearing - heading)
    climb = 0.3 * (target[2] - position[2])
    return Setpoints(
        airspeed=max(speed, cfg.v_min),
        turn_rate=min(cfg.turn_rate_max, max(-cfg.turn_rate_max, turn)),
        climb_rate=min(cfg.climb_rate_max, max(-cfg.climb_rate_max, climb)),
        mode=ControlMode.WAYPOINT,
    )


class FlightController:
    """One cascade instance per vehicle, stepped at the FC rate."""

    def __init__(self, cfg: FcConfig, params: AirshipParams):
        self.cfg = cfg
        self.params = params
        self.airspeed_pid = PidLoop(cfg.airspeed_kp, cfg.airspeed_ki, out_min=-0.4, out_max=0.4)
        self.turn_pid = PidLoop(cfg.turn_kp, cfg.turn_ki, cfg.turn_kd)
        self.climb_pid = PidLoop(
            cfg.climb_kp, cfg.climb_ki, out_min=-cfg.pitch_sp_max, out_max=cfg.pitch_sp_max
        )
        self.pitch_pid = PidLoop(cfg.pitch_kp, 0.0, cfg.pitch_kd)
        self.events: list[str] = []

    def reset(self):
        for pid in (self.airspeed_pid, self.turn_pid, self.climb_pid, self.pitch_pid):
            pid.reset()

    def failsafe_setpoints(self) -> Setpoints:
        return Setpoints(airspeed=self.cfg.v_min, turn_rate=0.0, climb_rate=0.0)

    def step(
        self,
        est,
        sp: Setpoints,
        dt: float,
        now: float | None = None,
        throttle_override: float | None = None,
    ) -> ActuatorCommand:
        """est needs: airspeed, attitude (quat), velocity, body_rates, stamp."""
        cfg = self.cfg
        if now is not None and now - est.stamp > cfg.stale_timeout:
            self.events.append("stale_estimate_failsafe")
            sp = self.failsafe_setpoints()

        v_sp = min(cfg.v_max, max(cfg.v_min, sp.airspeed))
        turn_sp = min(cfg.turn_rate_max, max(-cfg.turn_rate_max, sp.turn_rate))
        climb_sp = min(cfg.climb_rate_max, max(-cfg.climb_rate_max, sp.climb_rate))

        if throttle_override is not None:
            throttle = min(self.params.throttle_cap, max(0.0, throttle_override))
        else:
            ff = self.params.trim_throttle(v_sp)
            throttle = ff + self.airspeed_pid.step(v_sp - est.airspeed, dt)
            throttle = min(self.params.throttle_cap, max(0.0, throttle))

        yaw_rate = est.body_rates[2]
        rudder_yaw = self.turn_pid.step(turn_sp - yaw_rate, dt, rate=None)

        pitch_sp = self.climb_pid.step(climb_sp - est.velocity[2], dt)
        pitch = pitch_of(est.attitude)
        pitch_rate = est.body_rates[1]  # +y body rate pitches nose down
        rudder_pitch = self.pitch_pid.step(pitch_sp - pitch, dt, rate=-pitch_rate)

        return ActuatorCommand(
            throttle_left=throttle,
            throttle_right=throttle,
            rudder_yaw=rudder_yaw,
            rudder_pitch=rudder_pitch,
        ).clamped(self.params.throttle_cap)
