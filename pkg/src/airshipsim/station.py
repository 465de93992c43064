"""Operator ground-station service.

WebSocket endpoint `/ws` speaks one JSON object per text frame. The server
pushes `hello` (schema version + scenario hash) first, then periodic
`state_update` (5 Hz sim time) and `camera_view` (2 Hz) snapshots plus
immediate `event` messages. Clients send `select_subject`, `set_mode`,
`manual_control` and `sim_control`; every command is acknowledged by an
`event` of name `ack` carrying the command's seq. The simulation runs in a
worker thread; commands enter its queue and take effect at step boundaries,
so a paused simulation applies nothing until resume.

Backpressure: per-client snapshot buffers are bounded and drop the oldest
snapshot first; events and the hello are never dropped.
"""
from __future__ import annotations

import asyncio
import json
import threading
import time
from collections import deque
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse
from fastapi.staticfiles import StaticFiles

from .orchestrator import DT, PHYSICS_RATE, Simulation
from .scenario import Scenario
from .telemetry import SCHEMA_VERSION, read_log

SNAPSHOT_BUFFER = 16
STATIC_DIR = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"


class SimSession:
    """Steps a Simulation in a worker thread with pause/speed control."""

    def __init__(self, sim: Simulation):
        self.sim = sim
        sim.publish_enabled = True
        self.speed = 1.0
        self.paused = False
        self._pending_pause = False
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.max_ticks = int(round(sim.scenario.duration_s * PHYSICS_RATE))

    def hello(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario_hash": self.sim.scenario.scenario_hash(),
            "scenario_name": self.sim.scenario.name,
            "n_vehicles": len(self.sim.vehicles),
        }

    def start(self):
        self._thread = threading.Thread(target=self._loop, name="sim", daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5.0)
        if self.sim.writer:
            self.sim.writer.close()

    def handle_command(self, cmd: dict):
        if cmd.get("kind") == "sim_control":
            action = cmd.get("action")
            if action == "pause":
                # defer until the command queue drains so the ack still flows
                self._pending_pause = True
            elif action == "resume":
                self._pending_pause = False
                self.paused = False
            elif action == "speed":
                try:
                    self.speed = max(0.05, min(20.0, float(cmd.get("value", 1.0))))
                except (TypeError, ValueError):
                    pass
        self.sim.enqueue_command(cmd)

    def _loop(self):
        chunk = 10  # ticks per pacing check (20 ms sim time)
        sim_ahead = 0.0
        last = time.monotonic()
        while not self._stop.is_set() and self.sim.tick < self.max_ticks:
            if self.paused:
                time.sleep(0.02)
                last = time.monotonic()
                sim_ahead = 0.0
                continue
            for _ in range(min(chunk, self.max_ticks - self.sim.tick)):
                self.sim.step()
            if self._pending_pause and not self.sim.has_pending_commands():
                self._pending_pause = False
                self.paused = True
            sim_ahead += chunk * DT
            now = time.monotonic()
            wall = (now - last) * self.speed
            lag = sim_ahead - wall
            if lag > 0.002:
                time.sleep(lag / self.speed)
            if wall > 1.0:  # re-anchor to avoid drift accumulation
                last = now
                sim_ahead = max(0.0, lag)


class ReplaySession:
    """Feeds logged records back through the station protocol."""

    def __init__(self, log_path: str, speed: float = 1.0):
        self.contents = read_log(log_path)
        self.speed = speed if speed > 0 else 0.0
        self.paused = False
        self.outbox: deque = deque()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.sim = None  # no live simulation behind a replay

    def hello(self) -> dict:
        h = self.contents.header
        return {
            "schema_version": h.get("schema_version", SCHEMA_VERSION),
            "scenario_hash": h.get("scenario_hash", ""),
            "scenario_name": h.get("name", "replay"),
            "n_vehicles": h.get("n_vehicles", 0),
            "replay": True,
        }

    def handle_command(self, cmd: dict):
        if cmd.get("kind") == "sim_control":
            action = cmd.get("action")
            if action == "pause":
                self.paused = True
            elif action == "resume":
                self.paused = False
        self.outbox.append(
            (
                "event",
                {
                    "name": "ack",
                    "seq": cmd.get("seq", -1),
                    "command": cmd.get("kind"),
                    "status": "ok" if cmd.get("kind") == "sim_control" else "rejected",
                    "reason": None if cmd.get("kind") == "sim_control" else "replay session",
                },
            )
        )

    def start(self):
        self._thread = threading.Thread(target=self._loop, name="replay", daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5.0)

    def _loop(self):
        latest: dict = {"vehicles": {}, "subject": None, "track": None}
        last_emit = None
        start_wall = time.monotonic()
        start_sim = None
        for rec in self.contents.records:
            if self._stop.is_set():
                return
            while self.paused and not self._stop.is_set():
                time.sleep(0.02)
            t = rec["t"]
            if self.speed > 0:
                if start_sim is None:
                    start_sim = t
                due = (t - start_sim) / 1e6 / self.speed
                lag = due - (time.monotonic() - start_wall)
                if lag > 0:
                    time.sleep(lag)
            kind = rec["kind"]
            if kind == "nav_estimate":
                latest["vehicles"][rec.get("vehicle", 0)] = rec["data"]
            elif kind == "subject_state":
                latest["subject"] = rec["data"]
            elif kind == "track":
                latest["track"] = rec["data"]
            elif kind == "event":
                self.outbox.append(("event", {"t": t, **rec["data"]}))
            if last_emit is None or t - last_emit >= 200_000:
                last_emit = t
                vehicles = [
                    {"id": vid, **data} for vid, data in sorted(latest["vehicles"].items())
                ]
                self.outbox.append(
                    (
                        "state_update",
                        {
                            "t": t,
                            "vehicles": vehicles,
                            "subject_true": (latest["subject"] or {}).get("position"),
                            "track": latest["track"],
                            "replay": True,
                        },
                    )
                )


class _Client:
    def __init__(self):
        self.events: deque = deque()
        self.snapshots: deque = deque(maxlen=SNAPSHOT_BUFFER)
        self.wake = asyncio.Event()

    def push(self, kind: str, payload: dict):
        if kind == "event":
            self.events.append((kind, payload))
        else:
            if len(self.snapshots) == self.snapshots.maxlen:
                # drop the oldest state_update first, keep newer data flowing
                self.snapshots.popleft()
            self.snapshots.append((kind, payload))
        self.wake.set()


def build_app(session, token: str = "") -> FastAPI:
    clients: set[_Client] = set()

    async def broadcaster():
        outbox = session.sim.outbox if session.sim is not None else session.outbox
        while True:
            sent = 0
            while outbox and sent < 256:
                kind, payload = outbox.popleft()
                for c in list(clients):
                    c.push(kind, payload)
                sent += 1
            await asyncio.sleep(0.02)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(broadcaster())
        session.start()
        try:
            yield
        finally:
            task.cancel()
            session.stop()

    app = FastAPI(title="airshipsim station", lifespan=lifespan)

    @app.get("/", response_class=HTMLResponse)
    async def index():
        page = STATIC_DIR / "index.html"
        if page.exists():
            return FileResponse(page)
        return HTMLResponse(
            "<html><body><h3>airshipsim station</h3>"
            "<p>No UI build found. Connect a WebSocket client to /ws.</p></body></html>"
        )

    if STATIC_DIR.exists():
        app.mount("/static", StaticFiles(directory=STATIC_DIR), name="static")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        if token and ws.query_params.get("token", "") != token:
            await ws.close(code=4401)
            return
        await ws.accept()
        client = _Client()
        seq = 0

        async def send(kind: str, payload: dict):
            nonlocal seq
            await ws.send_text(
                json.dumps(
                    {"kind": kind, "seq": seq, "time_us": payload.get("t", 0), "payload": payload},
                    sort_keys=True,
                )
            )
            seq += 1

        await send("hello", session.hello())
        clients.add(client)

        async def sender():
            while True:
                await client.wake.wait()
                client.wake.clear()
                while client.events:
                    kind, payload = client.events.popleft()
                    await send(kind, payload)
                while client.snapshots:
                    kind, payload = client.snapshots.popleft()
                    await send(kind, payload)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict) or "kind" not in msg:
                        raise ValueError("not a command object")
                except (json.JSONDecodeError, ValueError) as exc:
                    await send("event", {"name": "protocol_error", "reason": str(exc)})
                    continue
                session.handle_command(msg)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            clients.discard(client)

    return app


def serve_scenario(scenario: Scenario, port: int = 8750, token: str = "",
                   out_dir: str = "runs"):
    import uvicorn

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / f"{scenario.name}_seed{scenario.master_seed}_live.jsonl"
    sim = Simulation(scenario, log_path)
    session = SimSession(sim)
    app = build_app(session, token)
    print(f"station on http://0.0.0.0:{port}  (ws: /ws, log: {log_path})")
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="warning")


def serve_replay(log_path: str, speed: float = 1.0, port: int = 8750, token: str = ""):
    import uvicorn

    session = ReplaySession(log_path, speed)
    app = build_app(session, token)
    print(f"replay station on http://0.0.0.0:{port}")
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="warning")
