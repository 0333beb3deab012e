// Fixed-capacity history of chart samples.  Snapshots arrive at 50 Hz and
// the charts show the last 10 s, so 500 rows of 18 channels (master then
// slave, theta/omega/tau) plus the timestamp.

import type { Snapshot } from "./protocol.js";

export const CHANNELS = 18;

export class SampleRing {
  private readonly cap: number;
  private readonly t: Float64Array;
  private readonly rows: Float64Array;
  private head = 0; // next write slot
  private count = 0;

  constructor(capacity = 500) {
    if (capacity <= 0) throw new Error("capacity must be positive");
    this.cap = capacity;
    this.t = new Float64Array(capacity);
    this.rows = new Float64Array(capacity * CHANNELS);
  }

  get length(): number {
    return this.count;
  }

  clear(): void {
    this.head = 0;
    this.count = 0;
  }

  push(snap: Snapshot): void {
    const base = this.head * CHANNELS;
    const m = snap.master;
    const s = snap.slave;
    const vals = [
      ...m.theta, ...m.omega, ...m.tau,
      ...s.theta, ...s.omega, ...s.tau,
    ];
    for (let i = 0; i < CHANNELS; i++) this.rows[base + i] = vals[i];
    this.t[this.head] = snap.t;
    this.head = (this.head + 1) % this.cap;
    if (this.count < this.cap) this.count += 1;
  }

  /** Oldest-to-newest timestamps. */
  times(): number[] {
    const out: number[] = new Array(this.count);
    const start = (this.head - this.count + this.cap) % this.cap;
    for (let i = 0; i < this.count; i++) {
      out[i] = this.t[(start + i) % this.cap];
    }
    return out;
  }

  /** Oldest-to-newest values of one channel. */
  channel(ch: number): number[] {
    if (ch < 0 || ch >= CHANNELS) throw new Error(`bad channel ${ch}`);
    const out: number[] = new Array(this.count);
    const start = (this.head - this.count + this.cap) % this.cap;
    for (let i = 0; i < this.count; i++) {
      out[i] = this.rows[((start + i) % this.cap) * CHANNELS + ch];
    }
    return out;
  }

  latestT(): number | null {
    if (this.count === 0) return null;
    const last = (this.head - 1 + this.cap) % this.cap;
    return this.t[last];
  }
}
