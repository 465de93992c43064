// Synthetic camera view: perspective ground grid, subject box, predicted
// ROI, and click-to-select with an optimistic marker cleared by the ack.

import type { CameraViewEntry } from "./protocol.js";
import type { StationSocket } from "./socket.js";
import type { ViewState } from "./viewState.js";
import type { Draw2D } from "./mapRenderer.js";

export function clickToPixel(
  offsetX: number,
  offsetY: number,
  width: number,
  height: number,
): { u: number; v: number } {
  return {
    u: Math.min(1, Math.max(0, offsetX / width)),
    v: Math.min(1, Math.max(0, offsetY / height)),
  };
}

export class CameraPanel {
  selectedVehicle = 0;

  constructor(
    private ctx: Draw2D,
    private width: number,
    private height: number,
    private view: ViewState,
    private socket: StationSocket,
  ) {}

  /** Click handler: sends select_subject for the displayed vehicle.
   * Returns the command seq, or null when refused (disconnected). */
  click(offsetX: number, offsetY: number): number | null {
    if (!this.socket.open) return null;
    const { u, v } = clickToPixel(offsetX, offsetY, this.width, this.height);
    return this.socket.send(
      "select_subject",
      { vehicle: this.selectedVehicle, u, v },
      { vehicle: this.selectedVehicle, u, v },
    );
  }

  currentView(): CameraViewEntry | null {
    const cam = this.view.camera;
    if (!cam) return null;
    return cam.views.find((v) => v.vehicle === this.selectedVehicle) ?? null;
  }

  render(): void {
    const ctx = this.ctx;
    const w = this.width;
    const h = this.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#dfe8dc";
    ctx.beginPath();
    ctx.rect(0, 0, w, h);
    ctx.fill();
    // simple depressed-camera grid: verticals converge, horizontals compress
    ctx.strokeStyle = "#b8c8b2";
    ctx.lineWidth = 1;
    for (let i = 0; i <= 8; i++) {
      const x = (i / 8) * w;
      ctx.beginPath();
      ctx.moveTo(x, h);
      ctx.lineTo(w / 2 + (x - w / 2) * 0.55, 0);
      ctx.stroke();
    }
    for (let i = 0; i <= 6; i++) {
      const y = h * (1 - Math.pow(i / 6, 1.6));
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(w, y);
      ctx.stroke();
    }
    const entry = this.currentView();
    if (entry) {
      if (entry.roi) {
        const [cu, cv] = entry.roi.center;
        ctx.strokeStyle = "#d80";
        ctx.lineWidth = 1;
        ctx.beginPath();
        ctx.rect(
          (cu - entry.roi.half_u) * w,
          (cv - entry.roi.half_v) * h,
          2 * entry.roi.half_u * w,
          2 * entry.roi.half_v * h,
        );
        ctx.stroke();
      }
      if (entry.subject_pixel) {
        const [u, v] = entry.subject_pixel;
        ctx.strokeStyle = "#c22";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.rect(u * w - 8, v * h - 8, 16, 16);
        ctx.stroke();
      }
      ctx.fillStyle = "#333";
      ctx.font = "11px sans-serif";
      ctx.fillText(
        `vehicle #${entry.vehicle}  alt ${entry.altitude.toFixed(1)} m`,
        8,
        14,
      );
    }
    // optimistic click markers (pending selection, cleared by the ack)
    for (const m of this.view.pendingMarkers(this.selectedVehicle)) {
      ctx.strokeStyle = "#27c";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.arc(m.u * w, m.v * h, 10, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.beginPath();
      ctx.moveTo(m.u * w - 14, m.v * h);
      ctx.lineTo(m.u * w + 14, m.v * h);
      ctx.moveTo(m.u * w, m.v * h - 14);
      ctx.lineTo(m.u * w, m.v * h + 14);
      ctx.stroke();
    }
  }
}
