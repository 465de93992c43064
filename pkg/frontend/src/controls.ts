// Mode buttons, manual-override sliders, and sim pacing. Button enablement
// mirrors the server's guards (autonomous needs a subject track; sliders
// are live only in manual mode); every command waits for its ack.

import type { StationSocket } from "./socket.js";
import type { ViewState } from "./viewState.js";

export const MODES = ["manual", "rate", "hold_position", "waypoint", "autonomous"] as const;

export interface ControlDecision {
  enabled: boolean;
  tooltip?: string;
}

export function modeButtonState(view: ViewState, mode: string): ControlDecision {
  if (view.connection !== "up") {
    return { enabled: false, tooltip: "disconnected" };
  }
  if (mode === "autonomous" && !view.trackInitialized()) {
    return { enabled: false, tooltip: "no subject selected" };
  }
  return { enabled: true };
}

export function manualSlidersActive(view: ViewState, vehicle: number): boolean {
  return view.connection === "up" && view.vehicleMode(vehicle) === "manual";
}

export class ControlsPanel {
  vehicle = 0;
  private toasts: string[] = [];

  constructor(private view: ViewState, private socket: StationSocket) {}

  setMode(mode: string): number | null {
    if (!modeButtonState(this.view, mode).enabled) return null;
    return this.socket.send("set_mode", { vehicle: this.vehicle, mode });
  }

  manualControl(throttle: number, rudderYaw: number, rudderPitch: number): number | null {
    if (!manualSlidersActive(this.view, this.vehicle)) return null;
    return this.socket.send("manual_control", {
      vehicle: this.vehicle,
      throttle,
      rudder_yaw: rudderYaw,
      rudder_pitch: rudderPitch,
    });
  }

  pause(): number | null {
    const seq = this.socket.send("sim_control", { action: "pause" });
    if (seq !== null) this.view.paused = true;
    return seq;
  }

  resume(): number | null {
    const seq = this.socket.send("sim_control", { action: "resume" });
    if (seq !== null) this.view.paused = false;
    return seq;
  }

  setSpeed(value: number): number | null {
    return this.socket.send("sim_control", { action: "speed", value });
  }

  toast(message: string): void {
    this.toasts.push(message);
    if (this.toasts.length > 5) this.toasts.shift();
  }

  recentToasts(): readonly string[] {
    return this.toasts;
  }
}
