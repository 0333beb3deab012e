// Wire protocol of the simulator service: JSON text frames over a
// WebSocket at /sim.  Every rendered quantity originates from Snapshot
// frames -- the client runs no physics of its own.

export const PROTOCOL_VERSION = 1;

export interface JointTriplet {
  theta: number[];
  omega: number[];
  tau: number[];
}

export interface ObjectState {
  s: number;
  z: number;
  engaged: boolean;
  plate_a_s: number;
  plate_b_s: number;
}

export interface Snapshot {
  type: "snapshot";
  t: number;
  k: number;
  mode: string;
  phase: string;
  master: JointTriplet;
  slave: JointTriplet;
  object: ObjectState;
}

export interface Geometry {
  l1: number;
  l2: number;
  spoon_offset: number;
  arc_radius: number;
  surface_z: number;
  desk_z: number;
  plate_a_s: number;
  plate_b_s: number;
  plate_radius: number;
  object_size: number;
  trial_length_s: number;
}

export interface HelloMsg {
  type: "hello";
  version: number;
  objects: string[];
  methods: string[];
}

export interface AckMsg {
  type: "ack";
  what: string;
  trial_id?: string;
  geometry?: Geometry;
}

export interface TrialDoneMsg {
  type: "trial_done";
  trial_id: string;
  success: boolean;
  failure_mode: string;
  detail: string;
}

export interface TranscriptMsg {
  type: "transcript";
  meta: Record<string, unknown>;
  events: unknown[];
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMessage =
  | HelloMsg
  | AckMsg
  | Snapshot
  | TrialDoneMsg
  | TranscriptMsg
  | ErrorMsg;

function isVec3(x: unknown): x is number[] {
  return Array.isArray(x) && x.length === 3 &&
    x.every((v) => typeof v === "number" && Number.isFinite(v));
}

function isTriplet(x: unknown): x is JointTriplet {
  if (typeof x !== "object" || x === null) return false;
  const t = x as Record<string, unknown>;
  return isVec3(t.theta) && isVec3(t.omega) && isVec3(t.tau);
}

/** Parse one server frame; returns null (with a console diagnostic) for
 * anything malformed so the render loop keeps going. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch (err) {
    console.warn("cockpit: unparseable frame dropped", err);
    return null;
  }
  if (typeof doc !== "object" || doc === null) {
    console.warn("cockpit: non-object frame dropped");
    return null;
  }
  const msg = doc as Record<string, unknown>;
  switch (msg.type) {
    case "snapshot":
      if (
        typeof msg.t === "number" && Number.isFinite(msg.t) &&
        isTriplet(msg.master) && isTriplet(msg.slave) &&
        typeof msg.object === "object" && msg.object !== null
      ) {
        return msg as unknown as Snapshot;
      }
      console.warn("cockpit: malformed snapshot dropped", msg);
      return null;
    case "hello":
    case "ack":
    case "trial_done":
    case "transcript":
    case "error":
      return msg as unknown as ServerMessage;
    default:
      console.warn("cockpit: unknown frame type dropped", msg.type);
      return null;
  }
}

// ---- client -> server ----------------------------------------------------

export interface ClientStamp {
  seq: number;
  client_ts: number;
}

let seqCounter = 0;

/** Monotone per-page sequence numbers for input messages. */
export function nextStamp(now: number = Date.now()): ClientStamp {
  seqCounter += 1;
  return { seq: seqCounter, client_ts: now };
}

export function resetSeqForTest(): void {
  seqCounter = 0;
}

export function helloMessage(): string {
  return JSON.stringify({ type: "hello", version: PROTOCOL_VERSION });
}

export function modeSwitchMessage(
  mode: "collect" | "autonomous" | "idle",
  object?: string,
  method?: string,
  seed?: number,
): string {
  return JSON.stringify({ type: "mode_switch", mode, object, method, seed });
}

export function masterTargetMessage(
  yaw: number,
  z: number,
  vyaw = 0,
  vz = 0,
  now?: number,
): string {
  return JSON.stringify({
    type: "master_target",
    yaw,
    z,
    vyaw,
    vz,
    ...nextStamp(now),
  });
}

export function perturbMessage(
  fs: number,
  fz: number,
  duration = 0.3,
  now?: number,
): string {
  return JSON.stringify({
    type: "perturb",
    fs,
    fz,
    duration,
    ...nextStamp(now),
  });
}

export function exportMessage(): string {
  return JSON.stringify({ type: "export" });
}
