// Client-side state: everything rendered is reconstructed from the hello
// and subsequent frames, so a page reload rebuilds the identical view.

import type {
  CameraView,
  EventPayload,
  Frame,
  HelloPayload,
  StateUpdate,
} from "./protocol.js";

export type Connection = "connecting" | "up" | "stale" | "down";

export interface PendingCommand {
  seq: number;
  kind: string;
  sentAtMs: number;
  marker?: { vehicle: number; u: number; v: number };
}

export interface AckResult {
  seq: number;
  command: string;
  status: "ok" | "rejected";
  reason?: string | null;
  marker?: { vehicle: number; u: number; v: number };
  event: EventPayload;
}

interface TimedState {
  data: StateUpdate;
  recvMs: number;
}

export class ViewState {
  hello: HelloPayload | null = null;
  connection: Connection = "connecting";
  events: EventPayload[] = [];
  latest: TimedState | null = null;
  previous: TimedState | null = null;
  camera: CameraView | null = null;
  paused = false;
  private lastServerSeq = -1;
  private nextCommandSeq = 1;
  private pending = new Map<number, PendingCommand>();
  readonly maxEvents = 200;

  /** Apply one server frame; returns the ack result when it resolves a
   * pending command (for toasts), else null. */
  applyFrame(frame: Frame, nowMs: number): AckResult | null {
    if (frame.seq <= this.lastServerSeq) {
      return null; // stale or duplicate: rendered data is latest-seq only
    }
    this.lastServerSeq = frame.seq;
    switch (frame.kind) {
      case "hello":
        this.hello = frame.payload as unknown as HelloPayload;
        this.connection = "up";
        return null;
      case "state_update": {
        this.previous = this.latest;
        this.latest = { data: frame.payload as unknown as StateUpdate, recvMs: nowMs };
        this.connection = "up";
        return null;
      }
      case "camera_view":
        this.camera = frame.payload as unknown as CameraView;
        return null;
      case "event": {
        const ev = frame.payload as unknown as EventPayload;
        this.events.push(ev);
        if (this.events.length > this.maxEvents) this.events.shift();
        if (ev.name === "ack" && typeof ev.seq === "number") {
          const pend = this.pending.get(ev.seq);
          if (pend) {
            this.pending.delete(ev.seq);
            if (ev.command === "sim_control" && ev.status === "ok") {
              // reflected pause state comes from our own acked commands
            }
            return {
              seq: ev.seq,
              command: String(ev.command ?? pend.kind),
              status: (ev.status as "ok" | "rejected") ?? "ok",
              reason: (ev.reason as string | null) ?? null,
              marker: pend.marker,
              event: ev,
            };
          }
        }
        return null;
      }
      default:
        return null;
    }
  }

  /** Register an outgoing command; returns its seq. */
  register(kind: string, marker?: PendingCommand["marker"], nowMs = 0): number {
    const seq = this.nextCommandSeq++;
    this.pending.set(seq, { seq, kind, sentAtMs: nowMs, marker });
    return seq;
  }

  unregister(seq: number): void {
    this.pending.delete(seq);
  }

  isPending(kind: string): boolean {
    for (const p of this.pending.values()) if (p.kind === kind) return true;
    return false;
  }

  /** Optimistic click markers awaiting their ack. */
  pendingMarkers(vehicle: number): { u: number; v: number }[] {
    const out: { u: number; v: number }[] = [];
    for (const p of this.pending.values()) {
      if (p.marker && p.marker.vehicle === vehicle) out.push({ u: p.marker.u, v: p.marker.v });
    }
    return out;
  }

  markDisconnected(): void {
    this.connection = "down";
    this.pending.clear();
  }

  markStale(): void {
    if (this.connection === "up") this.connection = "stale";
  }

  trackInitialized(): boolean {
    return this.latest?.data.track?.initialized ?? false;
  }

  vehicleMode(id: number): string | null {
    const v = this.latest?.data.vehicles.find((x) => x.id === id);
    return v ? v.mode : null;
  }

  /** Interpolated vehicle positions for >= 10 fps rendering from 5 Hz data. */
  interpolatedVehicles(nowMs: number): { id: number; x: number; y: number; heading: number; mode: string }[] {
    if (!this.latest) return [];
    const cur = this.latest.data.vehicles;
    if (!this.previous || this.previous.data.t >= this.latest.data.t) {
      return cur.map((v) => ({ id: v.id, x: v.position[0], y: v.position[1], heading: v.heading, mode: v.mode }));
    }
    const prev = this.previous.data.vehicles;
    const span = this.latest.recvMs - this.previous.recvMs;
    const alpha = span > 1 ? Math.min(1.5, (nowMs - this.latest.recvMs) / span + 1) : 1;
    return cur.map((v) => {
      const p = prev.find((x) => x.id === v.id);
      if (!p) return { id: v.id, x: v.position[0], y: v.position[1], heading: v.heading, mode: v.mode };
      const lerp = (a: number, b: number) => a + (b - a) * alpha;
      let dh = v.heading - p.heading;
      dh = Math.atan2(Math.sin(dh), Math.cos(dh));
      return {
        id: v.id,
        x: lerp(p.position[0], v.position[0]),
        y: lerp(p.position[1], v.position[1]),
        heading: p.heading + dh * alpha,
        mode: v.mode,
      };
    });
  }
}
