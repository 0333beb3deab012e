// Strip-chart helpers.  Scale computation and polyline layout are pure;
// only paint() touches a canvas context.

import { SampleRing } from "./ring.js";

export interface ChartRow {
  label: string;
  channels: number[]; // indices into the 18-channel layout
  colors: string[];
}

// master 0..8, slave 9..17; one row per quantity with both robots overlaid
export const CHART_ROWS: ChartRow[] = [
  {
    label: "position [rad]",
    channels: [0, 1, 2, 9, 10, 11],
    colors: ["#d33", "#d93", "#dd3", "#36d", "#3ad", "#3dd"],
  },
  {
    label: "velocity [rad/s]",
    channels: [3, 4, 5, 12, 13, 14],
    colors: ["#d33", "#d93", "#dd3", "#36d", "#3ad", "#3dd"],
  },
  {
    label: "torque [N m]",
    channels: [6, 7, 8, 15, 16, 17],
    colors: ["#d33", "#d93", "#dd3", "#36d", "#3ad", "#3dd"],
  },
];

export interface Scale {
  lo: number;
  hi: number;
}

/** Symmetric-ish scale over a set of series with a minimum span so flat
 * traces do not blow up to noise height. */
export function computeScale(series: number[][], minSpan = 0.1): Scale {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return { lo: -1, hi: 1 };
  const mid = (lo + hi) / 2;
  const span = Math.max(hi - lo, minSpan);
  return { lo: mid - span / 2 - span * 0.05, hi: mid + span / 2 + span * 0.05 };
}

/** Pixel polyline for one series over a fixed time window ending at tEnd. */
export function seriesPath(
  times: number[], values: number[], scale: Scale,
  tEnd: number, windowS: number, width: number, height: number,
): Array<[number, number]> {
  const t0 = tEnd - windowS;
  const out: Array<[number, number]> = [];
  for (let i = 0; i < times.length; i++) {
    if (times[i] < t0) continue;
    const x = ((times[i] - t0) / windowS) * width;
    const y = height -
      ((values[i] - scale.lo) / (scale.hi - scale.lo)) * height;
    out.push([x, y]);
  }
  return out;
}

export const CHART_WINDOW_S = 10;

export function paint(
  ctx: CanvasRenderingContext2D,
  ring: SampleRing,
  width: number,
  height: number,
  annotation: string,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.font = "11px sans-serif";
  const tEnd = ring.latestT();
  const rowH = Math.floor(height / CHART_ROWS.length);
  const times = ring.times();

  CHART_ROWS.forEach((row, r) => {
    const y0 = r * rowH;
    ctx.save();
    ctx.translate(0, y0);
    ctx.strokeStyle = "#ccc";
    ctx.strokeRect(0.5, 0.5, width - 1, rowH - 1);
    ctx.fillStyle = "#444";
    ctx.fillText(row.label, 6, 14);

    if (tEnd !== null) {
      const series = row.channels.map((ch) => ring.channel(ch));
      const scale = computeScale(series);
      series.forEach((vals, i) => {
        const pts = seriesPath(
          times, vals, scale, tEnd, CHART_WINDOW_S, width, rowH);
        if (pts.length < 2) return;
        ctx.strokeStyle = row.colors[i];
        ctx.beginPath();
        ctx.moveTo(pts[0][0], pts[0][1]);
        for (let k = 1; k < pts.length; k++) ctx.lineTo(pts[k][0], pts[k][1]);
        ctx.stroke();
      });
    }
    ctx.restore();
  });

  ctx.fillStyle = "#222";
  ctx.fillText(annotation, 6, height - 6);
}
