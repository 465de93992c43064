// Browser bootstrap: wires the socket, view state, canvases and controls.

import { CameraPanel } from "./cameraPanel.js";
import { ControlsPanel, MODES, manualSlidersActive, modeButtonState } from "./controls.js";
import { MapRenderer, type Draw2D } from "./mapRenderer.js";
import { StationSocket } from "./socket.js";
import { ViewState } from "./viewState.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

const view = new ViewState();
const token = new URLSearchParams(location.search).get("token") ?? "";
const proto = location.protocol === "https:" ? "wss:" : "ws:";
const controls = { panel: null as ControlsPanel | null };

const socket = new StationSocket(view, `${proto}//${location.host}`, token, {
  onAck(ack) {
    if (ack.status === "rejected") {
      controls.panel?.toast(`${ack.command} rejected: ${ack.reason ?? "unknown"}`);
      refreshEventLog();
    } else {
      refreshEventLog();
    }
  },
});

const mapCanvas = byId<HTMLCanvasElement>("map");
const camCanvas = byId<HTMLCanvasElement>("camera");
const mapCtx = mapCanvas.getContext("2d") as unknown as Draw2D;
const camCtx = camCanvas.getContext("2d") as unknown as Draw2D;
const map = new MapRenderer(mapCtx, mapCanvas.width, mapCanvas.height);
const camera = new CameraPanel(camCtx, camCanvas.width, camCanvas.height, view, socket);
const panel = new ControlsPanel(view, socket);
controls.panel = panel;

camCanvas.addEventListener("click", (ev) => {
  const rect = camCanvas.getBoundingClientRect();
  const seq = camera.click(
    ((ev.clientX - rect.left) / rect.width) * camCanvas.width,
    ((ev.clientY - rect.top) / rect.height) * camCanvas.height,
  );
  if (seq === null) panel.toast("not connected: click ignored");
});

const modeButtons = new Map<string, HTMLButtonElement>();
const modeBar = byId<HTMLDivElement>("modes");
for (const mode of MODES) {
  const btn = document.createElement("button");
  btn.textContent = mode;
  btn.onclick = () => panel.setMode(mode);
  modeBar.appendChild(btn);
  modeButtons.set(mode, btn);
}

byId<HTMLButtonElement>("pause").onclick = () => panel.pause();
byId<HTMLButtonElement>("resume").onclick = () => panel.resume();
byId<HTMLInputElement>("speed").onchange = (ev) =>
  panel.setSpeed(Number((ev.target as HTMLInputElement).value));

const sliders = ["throttle", "rudder_yaw", "rudder_pitch"].map((id) => byId<HTMLInputElement>(id));
for (const s of sliders) {
  s.oninput = () => {
    panel.manualControl(
      Number(sliders[0]!.value),
      Number(sliders[1]!.value),
      Number(sliders[2]!.value),
    );
  };
}

const eventLog = byId<HTMLUListElement>("events");
function refreshEventLog(): void {
  const items = view.events.slice(-12).reverse();
  eventLog.replaceChildren(
    ...items.map((ev) => {
      const li = document.createElement("li");
      const t = typeof ev.t === "number" ? `${(ev.t / 1e6).toFixed(1)}s ` : "";
      li.textContent = `${t}${ev.name}${ev.command ? ` ${ev.command}` : ""}${
        ev.status ? ` ${ev.status}` : ""
      }${ev.reason ? ` (${ev.reason})` : ""}`;
      return li;
    }),
  );
}

function refreshControls(): void {
  for (const [mode, btn] of modeButtons) {
    const st = modeButtonState(view, mode);
    btn.disabled = !st.enabled;
    btn.title = st.tooltip ?? "";
  }
  const manual = manualSlidersActive(view, panel.vehicle);
  for (const s of sliders) s.disabled = !manual;
  byId<HTMLSpanElement>("status").textContent =
    `${view.connection}${view.hello ? ` | ${view.hello.scenario_name}` : ""}` +
    `${view.paused ? " | paused" : ""}`;
  byId<HTMLDivElement>("toasts").textContent = panel.recentToasts().join("  •  ");
}

function frame(now: number): void {
  map.render(view, now);
  camera.render();
  refreshControls();
  requestAnimationFrame(frame);
}

socket.connect();
requestAnimationFrame(frame);
setInterval(refreshEventLog, 500);
