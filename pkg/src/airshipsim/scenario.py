"""Scenario configuration: dataclass defaults, TOML loading, validation.

Every block mirrors one subsystem's config dataclass; unknown keys and
out-of-range values are collected and reported together so a bad scenario
file fails with the full list of offending fields.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import ControlMode, FcConfig
from .dynamics import AirshipParams
from .environment import ThermalColumn, WindFieldConfig
from .errors import ConfigurationError
from .estimation import SensorConfig
from .formation import MpcConfig
from .perception import CameraModel, CommsConfig, DetectionConfig, TrackerConfig
from .subject import SubjectConfig

PHYSICS_RATE = 500  # Hz, physics + flight controller
SUBJECT_RATE = 50
PERCEPTION_RATE = 5
MPC_RATE = 2
WIND_RATE = 50


@dataclass
class VehicleSpec:
    start: tuple[float, float, float] = (0.0, 0.0, 40.0)
    heading_deg: float = 0.0
    airspeed: float = 0.0
    mode: str = "autonomous"


@dataclass
class SkyBoxSpec:
    min_corner: tuple[float, float, float] = (-250.0, -250.0, 15.0)
    max_corner: tuple[float, float, float] = (250.0, 250.0, 150.0)
    margin: float = 10.0


@dataclass
class EnvironmentSpec:
    mean_wind: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_tau: float = 5.0
    thermals: list[dict] = field(default_factory=list)


@dataclass
class Scenario:
    name: str = "unnamed"
    duration_s: float = 60.0
    master_seed: int = 0
    telemetry_rate: float = 25.0
    auto_select_subject: bool = True
    realtime: bool = False
    vehicles: list[VehicleSpec] = field(default_factory=lambda: [VehicleSpec()])
    skybox: SkyBoxSpec = field(default_factory=SkyBoxSpec)
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    subject: SubjectConfig = field(default_factory=SubjectConfig)
    airship: AirshipParams = field(default_factory=AirshipParams)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    fc: FcConfig = field(default_factory=FcConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    camera: CameraModel = field(default_factory=CameraModel)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    comms: CommsConfig = field(default_factory=CommsConfig)

    def validate(self) -> list[str]:
        bad: list[str] = []
        if self.duration_s <= 0:
            bad.append("duration_s: must be positive")
        if len(self.vehicles) < 0:
            bad.append("vehicles: negative count")
        lo, hi = self.skybox.min_corner, self.skybox.max_corner
        for axis in range(3):
            if hi[axis] <= lo[axis]:
                bad.append(f"skybox: max_corner[{axis}] <= min_corner[{axis}]")
        if self.skybox.margin <= 0:
            bad.append("skybox.margin: must be positive")
        for i, v in enumerate(self.vehicles):
            inside = all(lo[a] < v.start[a] < hi[a] for a in range(3))
            if not inside:
                bad.append(f"vehicles[{i}].start: outside the sky-box")
            if v.mode not in {m.value for m in ControlMode}:
                bad.append(f"vehicles[{i}].mode: unknown mode {v.mode!r}")
        if self.telemetry_rate <= 0 or PHYSICS_RATE % int(self.telemetry_rate):
            bad.append("telemetry_rate: must divide the 500 Hz base rate")
        if self.subject.behavior not in ("graze", "walk", "trot", "scripted"):
            bad.append(f"subject.behavior: unknown behavior {self.subject.behavior!r}")
        if self.subject.behavior == "scripted" and not self.subject.script_path:
            bad.append("subject.script_path: required for scripted behavior")
        return bad

    def canonical_dict(self) -> dict:
        def conv(obj):
            if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
                return {
                    f.name: conv(getattr(obj, f.name))
                    for f in dataclasses.fields(obj)
                    if f.init
                }
            if isinstance(obj, (list, tuple)):
                return [conv(x) for x in obj]
            if isinstance(obj, np.ndarray):
                return [conv(float(x)) for x in obj.ravel()]
            if isinstance(obj, (np.floating, np.integer)):
                return obj.item()
            return obj

        return conv(self)

    def scenario_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def wind_config(self) -> WindFieldConfig:
        thermals = [
            ThermalColumn(
                center=tuple(t["center"]),
                radius=float(t["radius"]),
                peak_vertical=float(t["peak_vertical"]),
                birth=float(t.get("birth", 0.0)),
                death=float(t.get("death", math.inf)),
            )
            for t in self.environment.thermals
        ]
        return WindFieldConfig(
            mean=tuple(self.environment.mean_wind),
            gust_std=tuple(self.environment.gust_std),
            gust_tau=self.environment.gust_tau,
            thermals=thermals,
        )


def _coerce(value, target):
    if isinstance(target, tuple) and isinstance(value, list):
        return tuple(value)
    return value


def _fill(cls, data: dict, section: str, errors: list[str]):
    names = {f.name: f for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            errors.append(f"{section}.{key}: unknown key")
            continue
        f = names[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        kwargs[key] = _coerce(value, default)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError, ConfigurationError) as exc:
        errors.append(f"{section}: {exc}")
        return cls()


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario TOML file."""
    raw = tomllib.loads(Path(path).read_text())
    errors: list[str] = []
    sc = Scenario()

    top = raw.get("scenario", {})
    for key in ("name", "duration_s", "master_seed", "telemetry_rate",
                "auto_select_subject", "realtime"):
        if key in top:
            setattr(sc, key, top[key])
    for key in top:
        if key not in {"name", "duration_s", "master_seed", "telemetry_rate",
                       "auto_select_subject", "realtime"}:
            errors.append(f"scenario.{key}: unknown key")

    if "vehicles" in raw:
        sc.vehicles = [
            _fill(VehicleSpec, v, f"vehicles[{i}]", errors) for i, v in enumerate(raw["vehicles"])
        ]
    section_map = {
        "skybox": ("skybox", SkyBoxSpec),
        "environment": ("environment", EnvironmentSpec),
        "subject": ("subject", SubjectConfig),
        "airship": ("airship", AirshipParams),
        "sensors": ("sensors", SensorConfig),
        "control": ("fc", FcConfig),
        "mpc": ("mpc", MpcConfig),
        "camera": ("camera", CameraModel),
        "detection": ("detection", DetectionConfig),
        "tracker": ("tracker", TrackerConfig),
        "comms": ("comms", CommsConfig),
    }
    for section, (attr, cls) in section_map.items():
        if section in raw:
            setattr(sc, attr, _fill(cls, raw[section], section, errors))
    known = set(section_map) | {"scenario", "vehicles"}
    for section in raw:
        if section not in known:
            errors.append(f"{section}: unknown section")

    errors.extend(sc.validate())
    if errors:
        raise ConfigurationError(
            "scenario validation failed:\n  " + "\n  ".join(errors), errors
        )
    return sc
