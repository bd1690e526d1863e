// Wire schema (version 1): one JSON document per WebSocket text frame.

export const WIRE_VERSION = 1;

export type Vec3 = [number, number, number];

export interface SegmentInfo {
  mode: string;
  channels: string[];
  kinds: string[];
  s_bar: number[];
}

export interface Scene {
  surfaces: { id: string; outline: number[][] }[];
  markers: { kind: string; polygon?: number[][]; point?: number[] }[];
  nominal_paths: { segment: string; points: number[][] }[];
}

export interface HelloMsg {
  type: "hello";
  v: number;
  scenario: string;
  dt: number;
  pace: number;
  device_range_m: number;
  segments: Record<string, SegmentInfo>;
  scene: Scene;
}

export interface StateMsg {
  type: "state";
  v: number;
  t: number;
  tick: number;
  seg: string;
  mode: string;
  s: number;
  progress: number;
  tau: number | null;
  dir: string;
  hold: number;
  xn: number[];
  dy: number[];
  xc: number[];
  u: number[];
  pos: number[];
  q: number[];
  f_meas: number;
  f_cmd: number | null;
  contact: number;
  sat: number;
  sbar: number[];
  channels: string[];
  frame: string[];
}

export interface EndMsg {
  type: "end";
  v: number;
  reason: string;
  t_total: number;
  t_input: number;
}

export interface ErrorMsg {
  type: "error";
  v: number;
  msg: string;
}

export interface HistoryMsg {
  type: "history";
  v: number;
  states: StateMsg[];
}

export type ServerMsg = HelloMsg | StateMsg | EndMsg | ErrorMsg | HistoryMsg;

export type ParseResult =
  | { ok: true; msg: ServerMsg }
  | { ok: false; error: string; versionMismatch?: boolean };

const KNOWN_TYPES = new Set(["hello", "state", "end", "error", "history"]);

export function parseServerMessage(raw: string): ParseResult {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return { ok: false, error: "malformed json" };
  }
  if (typeof doc !== "object" || doc === null) {
    return { ok: false, error: "not an object" };
  }
  const msg = doc as { type?: string; v?: number };
  if (msg.v !== WIRE_VERSION) {
    return {
      ok: false,
      error: `wire version ${msg.v} (expected ${WIRE_VERSION})`,
      versionMismatch: true,
    };
  }
  if (!msg.type || !KNOWN_TYPES.has(msg.type)) {
    return { ok: false, error: `unknown message type ${msg.type}` };
  }
  return { ok: true, msg: doc as ServerMsg };
}

export function clampAxis(x: number): number {
  return Math.min(1, Math.max(-1, x));
}

export function inputFrame(u: Vec3, tClient: number, overrides: Record<string, boolean> = {}): string {
  return JSON.stringify({
    type: "input",
    v: WIRE_VERSION,
    t_client: tClient,
    u: [clampAxis(u[0]), clampAxis(u[1]), clampAxis(u[2])],
    overrides,
  });
}

export function historyRequest(): string {
  return JSON.stringify({ type: "history_req", v: WIRE_VERSION });
}
