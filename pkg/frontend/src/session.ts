// Session state machine between the UI and the WebSocket.  The socket is
// injected behind a minimal interface so tests can drive the whole state
// machine without a network.

import {
  exportMessage,
  Geometry,
  helloMessage,
  masterTargetMessage,
  modeSwitchMessage,
  parseServerMessage,
  perturbMessage,
  ServerMessage,
  Snapshot,
  TranscriptMsg,
  TrialDoneMsg,
} from "./protocol.js";
import { SampleRing } from "./ring.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
}

export interface SessionCallbacks {
  onTrialDone?(msg: TrialDoneMsg): void;
  onTranscript?(msg: TranscriptMsg): void;
  onError?(message: string): void;
  onStateChange?(): void;
}

const MIN_TARGET_INTERVAL_MS = 20; // <= 50 Hz drag stream
const STALE_AFTER_MS = 500;

export class SessionClient {
  readonly ring = new SampleRing();
  latest: Snapshot | null = null;
  geometry: Geometry | null = null;
  objects: string[] = [];
  methods: string[] = [];
  trialId: string | null = null;
  method: string | null = null;
  connected = false;

  private sock: SocketLike | null = null;
  private lastTargetMs = -Infinity;
  private lastSnapshotMs = -Infinity;
  private readonly cb: SessionCallbacks;
  private readonly now: () => number;

  constructor(cb: SessionCallbacks = {}, now: () => number = Date.now) {
    this.cb = cb;
    this.now = now;
  }

  attach(sock: SocketLike): void {
    this.sock = sock;
    this.connected = true;
    sock.send(helloMessage());
    this.cb.onStateChange?.();
  }

  handleClose(): void {
    this.connected = false;
    this.sock = null;
    this.cb.onStateChange?.();
  }

  /** True when the operator must not trust the rendered state. */
  stale(): boolean {
    if (!this.connected) return true;
    if (this.latest === null) return false; // idle, nothing to be stale
    return this.now() - this.lastSnapshotMs > STALE_AFTER_MS;
  }

  handleFrame(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) return;
    this.dispatch(msg);
  }

  private dispatch(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.objects = msg.objects;
        this.methods = msg.methods;
        break;
      case "ack":
        if (msg.trial_id) this.trialId = msg.trial_id;
        if (msg.geometry) this.geometry = msg.geometry;
        this.ring.clear();
        this.latest = null;
        break;
      case "snapshot":
        this.latest = msg;
        this.lastSnapshotMs = this.now();
        this.ring.push(msg);
        break;
      case "trial_done":
        this.cb.onTrialDone?.(msg);
        break;
      case "transcript":
        this.cb.onTranscript?.(msg);
        break;
      case "error":
        this.cb.onError?.(msg.message);
        break;
    }
    this.cb.onStateChange?.();
  }

  startCollect(object: string, seed: number): void {
    this.method = null;
    this.sock?.send(modeSwitchMessage("collect", object, undefined, seed));
  }

  startAutonomous(object: string, method: string, seed: number): void {
    this.method = method;
    this.sock?.send(modeSwitchMessage("autonomous", object, method, seed));
  }

  stop(): void {
    this.sock?.send(modeSwitchMessage("idle"));
  }

  /** Rate-limited drag stream; returns true when a message went out. */
  sendMasterTarget(yaw: number, z: number, vyaw = 0, vz = 0): boolean {
    const t = this.now();
    if (t - this.lastTargetMs < MIN_TARGET_INTERVAL_MS) return false;
    this.lastTargetMs = t;
    this.sock?.send(masterTargetMessage(yaw, z, vyaw, vz, t));
    return true;
  }

  sendPerturb(fs: number, fz: number, duration = 0.3): void {
    this.sock?.send(perturbMessage(fs, fz, duration, this.now()));
  }

  requestTranscript(): void {
    this.sock?.send(exportMessage());
  }

  annotation(): string {
    const s = this.latest;
    if (s === null) return "idle";
    const who = s.mode === "autonomous" ? this.method ?? "autonomous"
      : s.mode;
    return `${who}  t=${s.t.toFixed(2)}s  phase=${s.phase}`;
  }
}
