import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  masterTargetMessage,
  nextStamp,
  parseServerMessage,
  perturbMessage,
  resetSeqForTest,
} from "../src/protocol.js";

const SNAP = {
  type: "snapshot",
  t: 0.4,
  k: 400,
  mode: "collect",
  phase: "scoop",
  master: { theta: [0, 0, 0], omega: [0, 0, 0], tau: [0, 0, 0] },
  slave: { theta: [0.1, -0.2, 0.3], omega: [0, 0, 0], tau: [0, 0, 0] },
  object: { s: 0.1, z: 0.2, engaged: false, plate_a_s: 0.15, plate_b_s: -0.15 },
};

describe("parseServerMessage", () => {
  beforeEach(() => {
    vi.spyOn(console, "warn").mockImplementation(() => {});
  });

  it("accepts a well-formed snapshot", () => {
    const msg = parseServerMessage(JSON.stringify(SNAP));
    expect(msg?.type).toBe("snapshot");
  });

  it("drops malformed snapshots but keeps running", () => {
    const bad = { ...SNAP, master: { theta: [0, 0], omega: [], tau: [] } };
    expect(parseServerMessage(JSON.stringify(bad))).toBeNull();
    expect(console.warn).toHaveBeenCalled();
  });

  it("drops non-finite joint values", () => {
    const bad = JSON.parse(JSON.stringify(SNAP));
    bad.slave.theta = [1, null, 2];
    expect(parseServerMessage(JSON.stringify(bad))).toBeNull();
  });

  it("drops garbage and unknown types", () => {
    expect(parseServerMessage("not json {")).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage('{"type":"mystery"}')).toBeNull();
  });

  it("passes through the other server frames", () => {
    for (const t of ["hello", "ack", "trial_done", "transcript", "error"]) {
      expect(parseServerMessage(JSON.stringify({ type: t }))?.type).toBe(t);
    }
  });
});

describe("client stamps", () => {
  it("sequence numbers are monotone", () => {
    resetSeqForTest();
    const a = nextStamp(100);
    const b = nextStamp(120);
    expect(b.seq).toBe(a.seq + 1);
    expect(a.client_ts).toBe(100);
  });

  it("input messages carry seq and timestamp", () => {
    resetSeqForTest();
    const m = JSON.parse(masterTargetMessage(0.2, 0.1, 0, 0, 555));
    expect(m.type).toBe("master_target");
    expect(m.seq).toBe(1);
    expect(m.client_ts).toBe(555);
    const p = JSON.parse(perturbMessage(0.3, 0, 0.2, 600));
    expect(p.seq).toBe(2);
    expect(p.fs).toBeCloseTo(0.3);
  });
});
