// Top-down map: sky-box outline, vehicles with heading glyphs and starboard
// FOV wedges, subject estimate with 2-sigma ellipse, wind arrow.

import {
  covarianceEllipse,
  fitTransform,
  starboardAzimuth,
  worldToScreen,
  type MapTransform,
} from "./geometry.js";
import type { ViewState } from "./viewState.js";

// the subset of CanvasRenderingContext2D the renderer touches (testable)
export interface Draw2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  ellipse(x: number, y: number, rx: number, ry: number, rot: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(rad: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
}

const FOV_HALF_RAD = (82 / 2) * (Math.PI / 180);
const WEDGE_RANGE_M = 90;

export class MapRenderer {
  framesRendered = 0;

  constructor(
    private ctx: Draw2D,
    private width: number,
    private height: number,
  ) {}

  render(view: ViewState, nowMs: number): void {
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.width, this.height);
    const state = view.latest?.data;
    if (!state) return;
    const box = state.skybox ?? {
      min_corner: [-250, -250, 0],
      max_corner: [250, 250, 100],
    };
    const t = fitTransform(this.width, this.height, box.min_corner, box.max_corner);

    this.drawSkybox(t, box.min_corner, box.max_corner);
    if (state.subject_true) this.drawSubjectTruth(t, state.subject_true);
    if (state.track?.initialized) this.drawTrack(t, state.track.mean, state.track.cov);
    for (const v of view.interpolatedVehicles(nowMs)) {
      this.drawVehicle(t, v.x, v.y, v.heading, v.id, v.mode);
    }
    if (state.wind_estimate) this.drawWind(state.wind_estimate);
    if (view.connection !== "up") {
      ctx.fillStyle = "#c33";
      ctx.font = "14px sans-serif";
      ctx.fillText(`link ${view.connection} — showing last data`, 12, 20);
    }
    this.framesRendered += 1;
  }

  private drawSkybox(t: MapTransform, lo: number[], hi: number[]): void {
    const ctx = this.ctx;
    const [x0, y0] = worldToScreen(t, lo[0]!, hi[1]!);
    const [x1, y1] = worldToScreen(t, hi[0]!, lo[1]!);
    ctx.beginPath();
    ctx.rect(x0, y0, x1 - x0, y1 - y0);
    ctx.strokeStyle = "#888";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  private drawSubjectTruth(t: MapTransform, s: [number, number]): void {
    const ctx = this.ctx;
    const [x, y] = worldToScreen(t, s[0], s[1]);
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fillStyle = "#7a5";
    ctx.fill();
  }

  private drawTrack(t: MapTransform, mean: number[], cov: ArrayLike<number>): void {
    const ctx = this.ctx;
    const e = covarianceEllipse(cov, 2);
    const [x, y] = worldToScreen(t, mean[0]!, mean[1]!);
    ctx.beginPath();
    // canvas y is flipped, so the ellipse rotation flips sign
    ctx.ellipse(x, y, e.rx * t.scale, e.ry * t.scale, -e.angle, 0, 2 * Math.PI);
    ctx.strokeStyle = "#d80";
    ctx.lineWidth = 1.5;
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fillStyle = "#d80";
    ctx.fill();
  }

  private drawVehicle(t: MapTransform, wx: number, wy: number, heading: number, id: number, mode: string): void {
    const ctx = this.ctx;
    const [x, y] = worldToScreen(t, wx, wy);
    // starboard camera wedge
    const az = starboardAzimuth(heading);
    const r = WEDGE_RANGE_M * t.scale;
    ctx.save();
    ctx.globalAlpha = 0.15;
    ctx.beginPath();
    ctx.moveTo(x, y);
    ctx.arc(x, y, r, -(az + FOV_HALF_RAD), -(az - FOV_HALF_RAD));
    ctx.closePath();
    ctx.fillStyle = "#48f";
    ctx.fill();
    ctx.restore();
    // heading glyph: triangle drawn nose-up, rotated to heading
    ctx.save();
    ctx.translate(x, y);
    ctx.rotate((Math.PI / 2 - heading) as number);
    ctx.beginPath();
    ctx.moveTo(0, -9);
    ctx.lineTo(5, 7);
    ctx.lineTo(-5, 7);
    ctx.closePath();
    ctx.fillStyle = mode === "autonomous" ? "#27c" : "#555";
    ctx.fill();
    ctx.restore();
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.fillText(`#${id} ${mode}`, x + 8, y - 8);
  }

  private drawWind(w: [number, number]): void {
    const ctx = this.ctx;
    const mag = Math.hypot(w[0], w[1]);
    const ox = this.width - 60;
    const oy = 40;
    ctx.save();
    ctx.translate(ox, oy);
    if (mag > 0.1) {
      const ang = Math.atan2(w[1], w[0]);
      ctx.rotate(-ang);
      const len = Math.min(30, 4 * mag);
      ctx.beginPath();
      ctx.moveTo(-len, 0);
      ctx.lineTo(len, 0);
      ctx.lineTo(len - 6, -4);
      ctx.moveTo(len, 0);
      ctx.lineTo(len - 6, 4);
      ctx.strokeStyle = "#36a";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
    ctx.restore();
    ctx.fillStyle = "#36a";
    ctx.font = "11px sans-serif";
    ctx.fillText(`wind ${mag.toFixed(1)} m/s`, ox - 28, oy + 24);
  }
}
