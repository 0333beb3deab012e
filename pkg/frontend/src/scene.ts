// Pure drawing math: world <-> pixel transforms, arm schematic points and
// the pointer-drag -> master target mapping.  Kept free of DOM types so
// the whole file is unit-testable.

import type { Geometry, JointTriplet } from "./protocol.js";

export interface Viewport {
  width: number;
  height: number;
}

export interface Window2D {
  sMin: number;
  sMax: number;
  zMin: number;
  zMax: number;
}

/** World window of the task-plane panel; derived from scene geometry so
 * plates and arm reach always fit. */
export function taskWindow(geo: Geometry): Window2D {
  const reach = geo.l1 + geo.l2 + geo.spoon_offset;
  const margin = geo.plate_radius * 1.5;
  return {
    sMin: Math.min(geo.plate_b_s, -geo.arc_radius * 0.9) - margin,
    sMax: Math.max(geo.plate_a_s, geo.arc_radius * 0.9) + margin,
    zMin: geo.desk_z - 0.03,
    zMax: Math.min(geo.surface_z + 0.12, reach),
  };
}

export function toPx(
  s: number, z: number, win: Window2D, vp: Viewport,
): [number, number] {
  const x = ((s - win.sMin) / (win.sMax - win.sMin)) * vp.width;
  const y = vp.height - ((z - win.zMin) / (win.zMax - win.zMin)) * vp.height;
  return [x, y];
}

export function toWorld(
  x: number, y: number, win: Window2D, vp: Viewport,
): [number, number] {
  const s = win.sMin + (x / vp.width) * (win.sMax - win.sMin);
  const z = win.zMin + ((vp.height - y) / vp.height) * (win.zMax - win.zMin);
  return [s, z];
}

/** Spoon-tip position in the task plane from joint angles. */
export function tipPosition(
  theta: number[], geo: Geometry,
): { s: number; z: number } {
  const l2e = geo.l2 + geo.spoon_offset;
  return {
    s: geo.arc_radius * theta[0],
    z: geo.l1 * Math.sin(theta[1]) + l2e * Math.sin(theta[2]),
  };
}

/** Side-view polyline of one arm: base, elbow, tip (radial-vertical
 * plane; yaw is shown separately as a dial). */
export function armSidePoints(
  theta: number[], geo: Geometry,
): Array<[number, number]> {
  const l2e = geo.l2 + geo.spoon_offset;
  const ex = geo.l1 * Math.cos(theta[1]);
  const ez = geo.l1 * Math.sin(theta[1]);
  return [
    [0, 0],
    [ex, ez],
    [ex + l2e * Math.cos(theta[2]), ez + l2e * Math.sin(theta[2])],
  ];
}

const clamp = (v: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, v));

export interface DragTarget {
  yaw: number;
  z: number;
}

/** Map a pointer position in the task panel to a master target.  Yaw and
 * z are clamped to the drawable window so a drag can never command the
 * arm out of range. */
export function dragToTarget(
  x: number, y: number, win: Window2D, vp: Viewport, geo: Geometry,
): DragTarget {
  const [s, z] = toWorld(x, y, win, vp);
  const yawLimit = Math.max(
    Math.abs(win.sMin), Math.abs(win.sMax)) / geo.arc_radius;
  return {
    yaw: clamp(s / geo.arc_radius, -yawLimit, yawLimit),
    z: clamp(z, win.zMin, win.zMax),
  };
}

/** Finite-difference velocity feedforward for a drag stream. */
export function dragVelocity(
  prev: DragTarget & { t: number } | null,
  next: DragTarget,
  t: number,
): { vyaw: number; vz: number } {
  if (prev === null || t <= prev.t) return { vyaw: 0, vz: 0 };
  const dt = t - prev.t;
  return {
    vyaw: clamp((next.yaw - prev.yaw) / dt, -8, 8),
    vz: clamp((next.z - prev.z) / dt, -2, 2),
  };
}

/** Readout shown next to each arm: joint torques formatted compactly. */
export function torqueReadout(j: JointTriplet): string {
  return j.tau.map((v) => (v >= 0 ? "+" : "") + v.toFixed(3)).join(" ");
}
