"""Length-prefixed JSON-lines telemetry: writing, reading, paced replay.

Each line is `<byte-length> <json-object>`; the prefix covers the JSON
payload only, so truncated or corrupted records are detectable and skipped
with a warning count. The first line is a header carrying the schema
version, the scenario hash, and the scenario facts metrics need (sky-box,
vehicle count, rates). Identical (scenario, seed) runs produce byte-identical
files: keys are sorted, floats use Python's shortest round-trip repr, and no
wall-clock values are recorded.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

SCHEMA_VERSION = 1

RECORD_KINDS = frozenset(
    {
        "true_state",
        "subject_state",
        "nav_estimate",
        "setpoints",
        "actuators",
        "wind_truth",
        "wind_estimate",
        "detection",
        "track",
        "plan_summary",
        "power",
        "perception",
        "event",
        "command",
    }
)


def _encode(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


class TelemetryWriter:
    def __init__(self, path: str | Path, header: dict):
        self.path = Path(path)
        self._fh = open(self.path, "w", buffering=1024 * 256)
        self._last_time_us = -1
        head = dict(header)
        head["schema_version"] = SCHEMA_VERSION
        self._write_line(head)

    def _write_line(self, obj: dict):
        body = _encode(obj)
        self._fh.write(f"{len(body.encode())} {body}\n")

    def write(self, time_us: int, kind: str, payload: dict, vehicle: int | None = None):
        if time_us < self._last_time_us:
            raise ValueError("telemetry time went backwards")
        self._last_time_us = time_us
        rec = {"t": time_us, "kind": kind, "data": payload}
        if vehicle is not None:
            rec["vehicle"] = vehicle
        self._write_line(rec)

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class LogContents:
    header: dict
    records: list[dict]
    warnings: int


def _parse_line(line: str) -> dict | None:
    line = line.rstrip("\n")
    if not line:
        return None
    sep = line.find(" ")
    if sep <= 0:
        return None
    try:
        length = int(line[:sep])
    except ValueError:
        return None
    body = line[sep + 1 :]
    if len(body.encode()) != length:
        return None
    try:
        return json.loads(body)
    except json.JSONDecodeError:
        return None


def read_log(path: str | Path) -> LogContents:
    """Parse a log; corrupt records are skipped and counted."""
    header: dict | None = None
    records: list[dict] = []
    warnings = 0
    with open(path) as fh:
        for i, line in enumerate(fh):
            obj = _parse_line(line)
            if obj is None:
                warnings += 1
                continue
            if i == 0 and "schema_version" in obj:
                header = obj
            else:
                records.append(obj)
    if header is None:
        raise ValueError(f"{path}: missing or corrupt header line")
    return LogContents(header=header, records=records, warnings=warnings)


def replay(
    path: str | Path,
    speed: float = 0.0,
    sink: Callable[[dict], None] | None = None,
) -> Iterator[dict]:
    """Re-emit records; speed 0 means as fast as possible, otherwise paced
    by sim-time / speed against the wall clock."""
    contents = read_log(path)

    def generate():
        start_wall = time.monotonic()
        start_sim: int | None = None
        for rec in contents.records:
            if speed > 0:
                if start_sim is None:
                    start_sim = rec["t"]
                due = (rec["t"] - start_sim) / 1e6 / speed
                lag = due - (time.monotonic() - start_wall)
                if lag > 0:
                    time.sleep(lag)
            if sink is not None:
                sink(rec)
            yield rec

    return generate()
