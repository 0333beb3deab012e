import { describe, expect, it } from "vitest";

import { SampleRing } from "../src/ring.js";
import type { Snapshot } from "../src/protocol.js";

function snap(t: number): Snapshot {
  return {
    type: "snapshot",
    t,
    k: Math.round(t * 1000),
    mode: "collect",
    phase: "scoop",
    master: { theta: [t, 0, 0], omega: [0, t, 0], tau: [0, 0, t] },
    slave: { theta: [-t, 0, 0], omega: [0, -t, 0], tau: [0, 0, -t] },
    object: {
      s: 0, z: 0, engaged: false, plate_a_s: 0.15, plate_b_s: -0.15,
    },
  };
}

describe("SampleRing", () => {
  it("keeps insertion order before wrapping", () => {
    const r = new SampleRing(8);
    for (let i = 0; i < 5; i++) r.push(snap(i * 0.02));
    expect(r.length).toBe(5);
    expect(r.times()).toEqual([0, 0.02, 0.04, 0.06, 0.08]);
    expect(r.channel(0)).toEqual([0, 0.02, 0.04, 0.06, 0.08]);
    expect(r.channel(9)).toEqual([-0, -0.02, -0.04, -0.06, -0.08]);
  });

  it("overwrites oldest samples after wrapping", () => {
    const r = new SampleRing(4);
    for (let i = 0; i < 10; i++) r.push(snap(i));
    expect(r.length).toBe(4);
    expect(r.times()).toEqual([6, 7, 8, 9]);
    expect(r.latestT()).toBe(9);
  });

  it("maps all 18 channels", () => {
    const r = new SampleRing(2);
    r.push(snap(1));
    expect(r.channel(4)).toEqual([1]); // master omega y
    expect(r.channel(17)).toEqual([-1]); // slave tau z
    expect(() => r.channel(18)).toThrow();
  });

  it("clear resets to empty", () => {
    const r = new SampleRing(4);
    r.push(snap(1));
    r.clear();
    expect(r.length).toBe(0);
    expect(r.latestT()).toBeNull();
  });

  it("rejects nonsense capacity", () => {
    expect(() => new SampleRing(0)).toThrow();
  });
});
