// Station wire protocol (schema version 1): one JSON object per text frame.

export interface Frame {
  kind: string;
  seq: number;
  time_us: number;
  payload: Record<string, unknown>;
}

export interface HelloPayload {
  schema_version: number;
  scenario_hash: string;
  scenario_name: string;
  n_vehicles: number;
  replay?: boolean;
}

export interface VehicleState {
  id: number;
  position: [number, number, number];
  velocity: [number, number, number];
  heading: number;
  airspeed: number;
  mode: string;
  true_position?: [number, number, number];
  energy_wh?: number;
}

export interface TrackState {
  mean: [number, number, number, number];
  cov: [number, number, number, number]; // 2x2 position block, row-major
  initialized: boolean;
}

export interface StateUpdate {
  t: number;
  vehicles: VehicleState[];
  subject_true?: [number, number] | null;
  track?: TrackState | null;
  wind_estimate?: [number, number];
  skybox?: { min_corner: number[]; max_corner: number[] };
}

export interface CameraViewEntry {
  vehicle: number;
  subject_pixel: [number, number] | null;
  roi: { center: [number, number]; half_u: number; half_v: number } | null;
  altitude: number;
}

export interface CameraView {
  t: number;
  views: CameraViewEntry[];
}

export interface EventPayload {
  name: string;
  seq?: number;
  command?: string;
  status?: "ok" | "rejected";
  reason?: string | null;
  t?: number;
  [key: string]: unknown;
}

export type CommandKind = "select_subject" | "set_mode" | "manual_control" | "sim_control";

export function parseFrame(text: string): Frame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const f = obj as Record<string, unknown>;
  if (typeof f.kind !== "string" || typeof f.seq !== "number") return null;
  return {
    kind: f.kind,
    seq: f.seq,
    time_us: typeof f.time_us === "number" ? f.time_us : 0,
    payload: (f.payload ?? {}) as Record<string, unknown>,
  };
}

export function encodeCommand(kind: CommandKind, seq: number, fields: Record<string, unknown>): string {
  return JSON.stringify({ kind, seq, ...fields });
}
