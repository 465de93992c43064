"""Deterministic fixed-timestep simulation loop.

One 500 Hz tick advances: queued commands, the subject (50 Hz), the wind
field (50 Hz), per-vehicle dynamics and power, sensors and the EKF at their
channel rates, perception and cooperative tracking at 5 Hz, inter-vehicle
measurement delivery (latency-ordered), wind estimation, the formation
planner at 2 Hz, and the flight-controller cascade. All randomness flows
from per-component generators derived from the master seed, so identical
(scenario, seed) runs produce byte-identical telemetry.
"""
from __future__ import annotations

import heapq
import math
import threading
import time as wallclock
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import (
    ControlMode,
    FlightController,
    Setpoints,
    SkyBox,
    skybox_guard,
    waypoint_nav,
)
from .dynamics import (
    ActuatorCommand,
    PowerState,
    VehicleTrueState,
    power_draw,
    step_dynamics,
)
from .environment import WindField
from .errors import IntegrationFault, NoGroundIntersection
from .estimation import Ekf, SensorSuite
from .formation import FormationPlanner, WindEstimator
from .metrics import RunMetrics, compute_metrics
from .perception import (
    CameraPose,
    SubjectTracker,
    comms_deliver,
    detection_roi,
    measurement_from_detection,
    pixel_to_ground,
    project_subject,
    simulate_detection,
)
from .quat import quat_from_yaw, yaw_of
from .scenario import (
    MPC_RATE,
    PERCEPTION_RATE,
    PHYSICS_RATE,
    SUBJECT_RATE,
    WIND_RATE,
    Scenario,
)
from .subject import SubjectModel
from .telemetry import TelemetryWriter, read_log

DT = 1.0 / PHYSICS_RATE

# fixed seed-stream indices per component (stable under feature toggles)
_SEED_ENV = 0
_SEED_SUBJECT = 1
_SEED_COMMS = 2
_SEED_VEHICLE_BASE = 10  # sensors at base+2i, detection at base+2i+1


def _component_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,)))
    )


@dataclass
class VehicleRuntime:
    index: int
    truth: VehicleTrueState
    fc: FlightController
    ekf: Ekf
    sensors: SensorSuite
    tracker: SubjectTracker
    wind_estimator: WindEstimator
    power: PowerState
    mode: ControlMode
    cmd: ActuatorCommand
    rate_setpoints: Setpoints = field(default_factory=Setpoints)
    manual_cmd: ActuatorCommand = field(default_factory=ActuatorCommand)
    hold_target: np.ndarray | None = None
    estimate: object = None


class Simulation:
    """Owns all module instances for one scenario run."""

    def __init__(self, scenario: Scenario, log_path: str | Path | None = None,
                 seed_override: int | None = None):
        bad = scenario.validate()
        if bad:
            from .errors import ConfigurationError

            raise ConfigurationError("scenario validation failed", bad)
        self.scenario = scenario
        self.seed = scenario.master_seed if seed_override is None else seed_override
        self.tick = 0
        self.box = SkyBox(
            tuple(scenario.skybox.min_corner),
            tuple(scenario.skybox.max_corner),
            scenario.skybox.margin,
        )
        self.wind_field = WindField(
            scenario.wind_config(),
            np.random.SeedSequence(self.seed, spawn_key=(_SEED_ENV,)),
        )
        self.subject = SubjectModel(scenario.subject, _component_rng(self.seed, _SEED_SUBJECT))
        self.comms_rng = _component_rng(self.seed, _SEED_COMMS)

        self.vehicles: list[VehicleRuntime] = []
        for i, spec in enumerate(scenario.vehicles):
            heading = math.radians(spec.heading_deg)
            q = quat_from_yaw(heading)
            vel = spec.airspeed * np.array([math.cos(heading), math.sin(heading), 0.0])
            truth = VehicleTrueState(
                position=np.asarray(spec.start, dtype=float).copy(),
                velocity=vel,
                attitude=q,
                body_rates=np.zeros(3),
                airspeed=spec.airspeed,
            )
            ekf = Ekf(scenario.sensors, truth.position, truth.velocity, truth.attitude)
            ekf.airspeed = spec.airspeed
            trim = scenario.airship.trim_throttle(max(spec.airspeed, 0.0))
            self.vehicles.append(
                VehicleRuntime(
                    index=i,
                    truth=truth,
                    fc=FlightController(scenario.fc, scenario.airship),
                    ekf=ekf,
                    sensors=SensorSuite(
                        scenario.sensors,
                        _component_rng(self.seed, _SEED_VEHICLE_BASE + 2 * i),
                    ),
                    tracker=SubjectTracker(scenario.tracker),
                    wind_estimator=WindEstimator(),
                    power=PowerState(
                        scenario.airship.battery_capacity_ah,
                        scenario.airship.battery_voltage,
                    ),
                    mode=ControlMode(spec.mode),
                    cmd=ActuatorCommand(trim, trim, 0.0, 0.0),
                )
            )
            self.vehicles[-1].estimate = ekf.estimate()
            if self.vehicles[-1].mode == ControlMode.HOLD_POSITION:
                self.vehicles[-1].hold_target = np.asarray(spec.start, dtype=float).copy()
        self.detect_rngs = [
            _component_rng(self.seed, _SEED_VEHICLE_BASE + 2 * i + 1)
            for i in range(len(self.vehicles))
        ]

        self.planner = FormationPlanner(
            scenario.mpc,
            len(self.vehicles),
            box=(
                np.asarray(self.box.min_corner, dtype=float),
                np.asarray(self.box.max_corner, dtype=float),
                self.box.margin,
            ),
        )
        self.plan = None
        self._pending_msgs: list = []  # heap of (arrival_tick, sender, receiver, seq, meas)
        self._msg_seq = 0

        if scenario.auto_select_subject:
            for v in self.vehicles:
                v.tracker.reinitialize(self.subject.state.position[:2], 0.0)

        self._commands: deque = deque()
        self._cmd_lock = threading.Lock()
        self.outbox: deque = deque()
        self.publish_enabled = False
        self.invocations = {
            "dynamics": 0,
            "subject": 0,
            "environment": 0,
            "perception": 0,
            "mpc": 0,
            "fc": 0,
        }

        self.log_path = Path(log_path) if log_path else None
        self.writer: TelemetryWriter | None = None
        if self.log_path:
            self.writer = TelemetryWriter(self.log_path, self._header())
        self._div_subject = PHYSICS_RATE // SUBJECT_RATE
        self._div_wind = PHYSICS_RATE // WIND_RATE
        self._div_percep = PHYSICS_RATE // PERCEPTION_RATE
        self._div_mpc = PHYSICS_RATE // MPC_RATE
        self._div_tlm = PHYSICS_RATE // int(scenario.telemetry_rate)
        self.faulted = False

    # ------------------------------------------------------------------

    def _header(self) -> dict:
        sc = self.scenario
        return {
            "name": sc.name,
            "scenario_hash": sc.scenario_hash(),
            "seed": self.seed,
            "n_vehicles": len(sc.vehicles),
            "duration_s": sc.duration_s,
            "telemetry_rate": sc.telemetry_rate,
            "battery_capacity_ah": sc.airship.battery_capacity_ah,
            "skybox": {
                "min_corner": list(sc.skybox.min_corner),
                "max_corner": list(sc.skybox.max_corner),
                "margin": sc.skybox.margin,
            },
        }

    @property
    def time_us(self) -> int:
        return self.tick * 2000

    @property
    def time_s(self) -> float:
        return self.time_us / 1e6

    def _log(self, kind: str, payload: dict, vehicle: int | None = None):
        if self.writer is not None:
            self.writer.write(self.time_us, kind, payload, vehicle)

    def _event(self, name: str, data: dict | None = None, vehicle: int | None = None):
        payload = {"name": name}
        if data:
            payload.update(data)
        self._log("event", payload, vehicle)
        if self.publish_enabled:
            self.outbox.append(("event", {"t": self.time_us, **payload}))

    # ------------------------------------------------------------------
    # external command interface (station)

    def enqueue_command(self, cmd: dict):
        with self._cmd_lock:
            self._commands.append(cmd)

    def has_pending_commands(self) -> bool:
        with self._cmd_lock:
            return bool(self._commands)

    def _drain_commands(self):
        while True:
            with self._cmd_lock:
                if not self._commands:
                    return
                cmd = self._commands.popleft()
            self._apply_command(cmd)

    def _apply_command(self, cmd: dict):
        kind = cmd.get("kind")
        seq = cmd.get("seq", -1)
        self._log("command", {k: v for k, v in cmd.items()})
        ack = {"name": "ack", "seq": seq, "command": kind, "status": "ok"}

        if kind == "select_subject":
            vi = int(cmd.get("vehicle", 0))
            if not 0 <= vi < len(self.vehicles):
                ack.update(status="rejected", reason="unknown vehicle")
            else:
                est = self.vehicles[vi].estimate
                pose = CameraPose.of_vehicle(est.position, est.attitude, self.scenario.camera)
                try:
                    point = pixel_to_ground(pose, (float(cmd["u"]), float(cmd["v"])))
                except (NoGroundIntersection, KeyError, TypeError, ValueError):
                    ack.update(status="rejected", reason="no ground intersection")
                else:
                    for v in self.vehicles:
                        v.tracker.reinitialize(point[:2], self.time_s)
                    ack["ground_point"] = [float(point[0]), float(point[1])]
        elif kind == "set_mode":
            vi = int(cmd.get("vehicle", 0))
            mode = cmd.get("mode", "")
            if not 0 <= vi < len(self.vehicles):
                ack.update(status="rejected", reason="unknown vehicle")
            elif mode not in {m.value for m in ControlMode}:
                ack.update(status="rejected", reason=f"unknown mode {mode!r}")
            elif mode == "autonomous" and not self.vehicles[vi].tracker.track.initialized:
                ack.update(status="rejected", reason="no subject selected")
            else:
                v = self.vehicles[vi]
                v.mode = ControlMode(mode)
                if v.mode == ControlMode.HOLD_POSITION:
                    v.hold_target = v.estimate.position.copy()
        elif kind == "manual_control":
            vi = int(cmd.get("vehicle", 0))
            if not 0 <= vi < len(self.vehicles):
                ack.update(status="rejected", reason="unknown vehicle")
            elif self.vehicles[vi].mode != ControlMode.MANUAL:
                ack.update(status="rejected", reason="vehicle not in manual mode")
            else:
                t = float(cmd.get("throttle", 0.0))
                self.vehicles[vi].manual_cmd = ActuatorCommand(
                    t, t, float(cmd.get("rudder_yaw", 0.0)), float(cmd.get("rudder_pitch", 0.0))
                )
        elif kind == "sim_control":
            pass  # pacing handled by the session wrapper; logged + acked here
        else:
            ack.update(status="rejected", reason=f"unknown command kind {kind!r}")
        self._event("ack", ack)

    # ------------------------------------------------------------------

    def step(self):
        """Advance one 500 Hz tick."""
        self._drain_commands()
        tick = self.tick
        self.tick += 1  # records written below carry the post-step time
        sc = self.scenario
        now = self.time_s

        if tick % self._div_subject == 0 and self.vehicles:
            for ev in self.subject.step(self._div_subject * DT):
                self._event(ev["event"], {"time": ev.get("time")})
            self.invocations["subject"] += 1
        if tick % self._div_wind == 0:
            self.wind_field.advance(self._div_wind * DT)
            self.invocations["environment"] += 1

        # dynamics + sensors + filters
        for v in self.vehicles:
            wind = self.wind_field.sample(v.truth.position, now)
            try:
                v.truth, diag = step_dynamics(sc.airship, v.truth, v.cmd, wind, DT)
            except IntegrationFault as fault:
                self.faulted = True
                self._event("integration_fault", fault.record, vehicle=v.index)
                raise
            self.invocations["dynamics"] += 1
            throttle_sq = 0.5 * (v.cmd.throttle_left**2 + v.cmd.throttle_right**2)
            v.power.update(power_draw(sc.airship, math.sqrt(throttle_sq)), DT)
            frame = v.sensors.sample(self.tick, v.truth, diag.specific_force_body, wind, now)
            v.ekf.ingest(frame, DT)
            v.estimate = v.ekf.estimate()

        if self.vehicles and tick % self._div_percep == 0:
            self._perception_step(now)
            self.invocations["perception"] += 1
        self._deliver_messages()

        if self.vehicles and tick % self._div_mpc == 0:
            self._mpc_step(now)
            self.invocations["mpc"] += 1

        for v in self.vehicles:
            self._fc_step(v, now)
            self.invocations["fc"] += 1

        if tick % self._div_tlm == 0 and self.vehicles:
            self._write_telemetry(now)
        if self.publish_enabled:
            self._publish(tick)

    # ------------------------------------------------------------------

    def _perception_step(self, now: float):
        sc = self.scenario
        subject_pos = self.subject.state.position
        detections = []
        for v in self.vehicles:
            true_pose = CameraPose.of_vehicle(v.truth.position, v.truth.attitude, sc.camera)
            proj = project_subject(true_pose, subject_pos)
            est = v.estimate
            est_pose = CameraPose.of_vehicle(est.position, est.attitude, sc.camera)
            roi = detection_roi(est_pose, v.tracker.track, sc.detection)
            det = simulate_detection(
                proj, roi, sc.detection, self.detect_rngs[v.index], now, v.index
            )
            # truth-side pointing metrics
            los = subject_pos - v.truth.position
            rng = float(np.linalg.norm(los))
            bore = true_pose.boresight_world
            cosang = float(np.dot(bore, los / max(rng, 1e-9)))
            centering = math.degrees(math.acos(max(-1.0, min(1.0, cosang))))
            azimuth = math.degrees(
                math.atan2(v.truth.position[1] - subject_pos[1],
                           v.truth.position[0] - subject_pos[0])
            )
            self._log(
                "perception",
                {
                    "in_fov": proj is not None,
                    "centering_deg": centering,
                    "azimuth_deg": azimuth,
                    "subject_horizontal_m": float(
                        math.hypot(los[0], los[1])
                    ),
                },
                vehicle=v.index,
            )
            if det is not None:
                self._log(
                    "detection",
                    {"u": det.pixel[0], "v": det.pixel[1], "source": det.source_vehicle},
                    vehicle=v.index,
                )
                meas = measurement_from_detection(det, est_pose, est.covariance[0:3, 0:3])
                if meas is not None:
                    detections.append((v.index, meas))
            self._log(
                "track",
                {
                    "mean": [float(x) for x in v.tracker.track.mean],
                    "cov": [float(x) for x in v.tracker.track.covariance.ravel()],
                    "initialized": v.tracker.track.initialized,
                },
                vehicle=v.index,
            )

        # local fusion immediately; remote via the lossy link
        for sender, meas in detections:
            self.vehicles[sender].tracker.fuse(meas)
            for v in self.vehicles:
                if v.index == sender:
                    continue
                ok, latency = comms_deliver(
                    self.vehicles[sender].truth.position,
                    v.truth.position,
                    self.scenario.comms,
                    self.comms_rng,
                )
                if not ok:
                    continue
                arrival = self.tick + max(1, int(round(latency / DT)))
                self._msg_seq += 1
                heapq.heappush(
                    self._pending_msgs, (arrival, sender, v.index, self._msg_seq, meas)
                )

    def _deliver_messages(self):
        while self._pending_msgs and self._pending_msgs[0][0] <= self.tick:
            _, sender, receiver, _, meas = heapq.heappop(self._pending_msgs)
            self.vehicles[receiver].tracker.fuse(meas)

    def _mpc_step(self, now: float):
        for v in self.vehicles:
            est = v.estimate
            v.wind_estimator.update(
                est.velocity[:2],
                est.airspeed,
                yaw_of(est.attitude),
                est.body_rates[2],
                self._div_mpc * DT,
            )
        wind = np.mean([v.wind_estimator.estimate.vector for v in self.vehicles], axis=0)
        states = np.array(
            [
                [
                    v.estimate.position[0],
                    v.estimate.position[1],
                    v.estimate.position[2],
                    yaw_of(v.estimate.attitude),
                ]
                for v in self.vehicles
            ]
        )
        self.plan = self.planner.plan(states, self.vehicles[0].tracker.track, wind, now)
        for ev in self.planner.events:
            self._event(ev)
        self.planner.events.clear()
        self._log(
            "plan_summary",
            {
                "cost": None if math.isnan(self.plan.total_cost) else self.plan.total_cost,
                "iterations": self.plan.iterations,
                "degraded": self.plan.degraded,
                "breakdown": {k: float(x) for k, x in self.plan.breakdown.items()},
                "residuals": {k: float(x) for k, x in self.plan.residuals.items()},
            },
        )
        for v in self.vehicles:
            self._log(
                "wind_estimate",
                {
                    "vector": [float(x) for x in v.wind_estimator.estimate.vector],
                    "confidence": v.wind_estimator.estimate.confidence,
                },
                vehicle=v.index,
            )

    def _fc_step(self, v: VehicleRuntime, now: float):
        sc = self.scenario
        est = v.estimate
        heading = yaw_of(est.attitude)

        if v.mode == ControlMode.AUTONOMOUS and self.plan is not None:
            u = self.plan.control_at(v.index, now - self.plan.created_at, sc.mpc.step_dt)
            sp = Setpoints(float(u[0]), float(u[1]), float(u[2]), ControlMode.AUTONOMOUS)
        elif v.mode in (ControlMode.HOLD_POSITION, ControlMode.WAYPOINT):
            target = v.hold_target if v.hold_target is not None else est.position
            sp = waypoint_nav(est.position, heading, target, sc.fc.v_min, sc.fc)
        elif v.mode == ControlMode.MANUAL:
            sp = Setpoints(mode=ControlMode.MANUAL)
        else:
            sp = v.rate_setpoints

        wind_vec = v.wind_estimator.estimate.vector
        guarded, guard_events = skybox_guard(
            est.position, est.velocity, heading, sp, self.box, sc.fc, wind_estimate=wind_vec
        )
        for ev in guard_events:
            self._event(ev, vehicle=v.index)

        if v.mode == ControlMode.MANUAL and not (
            sc.fc.manual_bypasses_geofence or guard_events
        ):
            v.cmd = v.manual_cmd.clamped(sc.airship.throttle_cap)
        else:
            v.cmd = v.fc.step(est, guarded, DT, now=now)
        for ev in v.fc.events:
            self._event(ev, vehicle=v.index)
        v.fc.events.clear()
        v.last_setpoints = guarded

    def _write_telemetry(self, now: float):
        for v in self.vehicles:
            t = v.truth
            self._log(
                "true_state",
                {
                    "position": [float(x) for x in t.position],
                    "velocity": [float(x) for x in t.velocity],
                    "attitude": [float(x) for x in t.attitude],
                    "airspeed": t.airspeed,
                },
                vehicle=v.index,
            )
            e = v.estimate
            self._log(
                "nav_estimate",
                {
                    "position": [float(x) for x in e.position],
                    "velocity": [float(x) for x in e.velocity],
                    "attitude": [float(x) for x in e.attitude],
                    "airspeed": e.airspeed,
                    "pos_cov": [float(x) for x in e.covariance[0:3, 0:3].ravel()],
                },
                vehicle=v.index,
            )
            sp = getattr(v, "last_setpoints", None)
            if sp is not None:
                self._log(
                    "setpoints",
                    {
                        "airspeed": sp.airspeed,
                        "turn_rate": sp.turn_rate,
                        "climb_rate": sp.climb_rate,
                        "mode": v.mode.value,
                    },
                    vehicle=v.index,
                )
            self._log(
                "actuators",
                {
                    "throttle_left": v.cmd.throttle_left,
                    "throttle_right": v.cmd.throttle_right,
                    "rudder_yaw": v.cmd.rudder_yaw,
                    "rudder_pitch": v.cmd.rudder_pitch,
                },
                vehicle=v.index,
            )
            self._log(
                "power",
                {
                    "power_w": v.power.current_draw * v.power.battery_voltage,
                    "current_a": v.power.current_draw,
                    "energy_wh": v.power.energy_used_wh,
                },
                vehicle=v.index,
            )
            wind = self.wind_field.sample(v.truth.position, now)
            self._log("wind_truth", {"vector": [float(x) for x in wind]}, vehicle=v.index)
        s = self.subject.state
        self._log(
            "subject_state",
            {
                "position": [float(x) for x in s.position],
                "velocity": [float(x) for x in s.velocity],
                "behavior": s.behavior,
            },
        )

    # ------------------------------------------------------------------
    # station snapshots

    def _publish(self, tick: int):
        if tick % 100 == 0:  # 5 Hz
            self.outbox.append(("state_update", self.state_snapshot()))
        if tick % 250 == 0:  # 2 Hz
            self.outbox.append(("camera_view", self.camera_snapshot()))

    def state_snapshot(self) -> dict:
        sc = self.scenario
        vehicles = []
        for v in self.vehicles:
            e = v.estimate
            vehicles.append(
                {
                    "id": v.index,
                    "position": [float(x) for x in e.position],
                    "velocity": [float(x) for x in e.velocity],
                    "heading": yaw_of(e.attitude),
                    "airspeed": e.airspeed,
                    "mode": v.mode.value,
                    "true_position": [float(x) for x in v.truth.position],
                    "energy_wh": v.power.energy_used_wh,
                }
            )
        track_payload = None
        if self.vehicles:
            tr = self.vehicles[0].tracker.track
            track_payload = {
                "mean": [float(x) for x in tr.mean],
                "cov": [float(x) for x in tr.covariance[0:2, 0:2].ravel()],
                "initialized": tr.initialized,
            }
        wind = (
            np.mean([v.wind_estimator.estimate.vector for v in self.vehicles], axis=0)
            if self.vehicles
            else np.zeros(2)
        )
        return {
            "t": self.time_us,
            "vehicles": vehicles,
            "subject_true": [float(x) for x in self.subject.state.position[:2]],
            "track": track_payload,
            "wind_estimate": [float(x) for x in wind],
            "skybox": {
                "min_corner": list(sc.skybox.min_corner),
                "max_corner": list(sc.skybox.max_corner),
            },
        }

    def camera_snapshot(self) -> dict:
        views = []
        for v in self.vehicles:
            pose = CameraPose.of_vehicle(v.truth.position, v.truth.attitude, self.scenario.camera)
            proj = project_subject(pose, self.subject.state.position)
            est_pose = CameraPose.of_vehicle(
                v.estimate.position, v.estimate.attitude, self.scenario.camera
            )
            roi = detection_roi(est_pose, v.tracker.track, self.scenario.detection)
            views.append(
                {
                    "vehicle": v.index,
                    "subject_pixel": list(proj) if proj else None,
                    "roi": {"center": list(roi[0]), "half_u": roi[1], "half_v": roi[2]}
                    if roi
                    else None,
                    "altitude": float(v.truth.position[2]),
                }
            )
        return {"t": self.time_us, "views": views}

    # ------------------------------------------------------------------

    def run(self, realtime: bool = False) -> RunMetrics:
        n_ticks = int(round(self.scenario.duration_s * PHYSICS_RATE))
        start = wallclock.monotonic()
        try:
            for k in range(n_ticks):
                self.step()
                if realtime:
                    lag = (k + 1) * DT - (wallclock.monotonic() - start)
                    if lag > 0.0005:
                        wallclock.sleep(lag)
        except IntegrationFault:
            pass  # fault event already logged; close with partial metrics
        self._event("run_end", {"faulted": self.faulted, "ticks": self.tick})
        if self.writer:
            self.writer.close()
        return self.metrics()

    def metrics(self, window: tuple[float, float] | None = None) -> RunMetrics:
        if self.log_path is None:
            return RunMetrics(n_vehicles=len(self.vehicles), duration_s=self.time_s)
        contents = read_log(self.log_path)
        return compute_metrics(contents.header, contents.records, contents.warnings, window)


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path,
    seed_override: int | None = None,
    realtime: bool = False,
) -> tuple[RunMetrics, Path]:
    """Run to completion; returns (metrics, log path)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = scenario.master_seed if seed_override is None else seed_override
    log_path = out / f"{scenario.name}_seed{seed}.jsonl"
    sim = Simulation(scenario, log_path, seed_override)
    metrics = sim.run(realtime=realtime or scenario.realtime)
    return metrics, log_path
