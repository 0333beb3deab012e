import { describe, expect, it } from "vitest";

import { CHART_ROWS, computeScale, seriesPath } from "../src/charts.js";

describe("computeScale", () => {
  it("pads the data range", () => {
    const s = computeScale([[0, 1, 2], [-1, 3]]);
    expect(s.lo).toBeLessThan(-1);
    expect(s.hi).toBeGreaterThan(3);
  });

  it("enforces a minimum span for flat traces", () => {
    const s = computeScale([[0.5, 0.5, 0.5]]);
    expect(s.hi - s.lo).toBeGreaterThanOrEqual(0.1);
    expect((s.hi + s.lo) / 2).toBeCloseTo(0.5, 6);
  });

  it("handles empty input", () => {
    const s = computeScale([]);
    expect(s.lo).toBeLessThan(s.hi);
  });
});

describe("seriesPath", () => {
  it("windows to the last N seconds", () => {
    const times = [0, 5, 9, 9.5, 10];
    const vals = [1, 2, 3, 4, 5];
    const pts = seriesPath(times, vals, { lo: 0, hi: 10 }, 10, 4, 100, 50);
    // only t >= 6 survive a 4 s window ending at t=10
    expect(pts.length).toBe(3);
    expect(pts[2][0]).toBeCloseTo(100);
  });

  it("maps values into pixel rows top-down", () => {
    const pts = seriesPath([0, 1], [0, 10], { lo: 0, hi: 10 }, 1, 1, 100, 50);
    expect(pts[0][1]).toBeCloseTo(50); // lo at the bottom
    expect(pts[1][1]).toBeCloseTo(0); // hi at the top
  });
});

describe("chart layout", () => {
  it("covers all 18 channels exactly once", () => {
    const all = CHART_ROWS.flatMap((r) => r.channels).sort((a, b) => a - b);
    expect(all).toEqual([...Array(18).keys()]);
  });

  it("pairs each channel with a color", () => {
    for (const row of CHART_ROWS) {
      expect(row.colors.length).toBe(row.channels.length);
    }
  });
});
