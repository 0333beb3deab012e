// DOM bootstrap: wires the session client to canvases and controls.
// All logic that can live outside the DOM is in scene/charts/session.

import { paint } from "./charts.js";
import {
  armSidePoints,
  dragToTarget,
  dragVelocity,
  taskWindow,
  tipPosition,
  toPx,
  torqueReadout,
  DragTarget,
  Viewport,
} from "./scene.js";
import { SessionClient } from "./session.js";

const $ = (id: string) => document.getElementById(id)!;

const client = new SessionClient({
  onTrialDone(msg) {
    $("status").textContent = msg.success
      ? `trial ${msg.trial_id}: success`
      : `trial ${msg.trial_id}: ${msg.failure_mode} — ${msg.detail}`;
  },
  onTranscript(msg) {
    const blob = new Blob([JSON.stringify(msg, null, 2)],
      { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = `${client.trialId ?? "session"}.transcript.json`;
    a.click();
    URL.revokeObjectURL(a.href);
  },
  onError(message) {
    $("status").textContent = `error: ${message}`;
  },
});

function connect(): void {
  const url = (location.protocol === "https:" ? "wss://" : "ws://") +
    location.host + "/sim";
  const ws = new WebSocket(url);
  ws.onopen = () => client.attach(ws);
  ws.onmessage = (ev) => client.handleFrame(String(ev.data));
  ws.onclose = () => {
    client.handleClose();
    setTimeout(connect, 1000);
  };
}

// ---- controls -------------------------------------------------------------

$("start-collect").addEventListener("click", () => {
  const obj = ($("object") as HTMLSelectElement).value;
  const seed = Number(($("seed") as HTMLInputElement).value) || 0;
  client.startCollect(obj, seed);
});

$("start-auto").addEventListener("click", () => {
  const obj = ($("object") as HTMLSelectElement).value;
  const method = ($("method") as HTMLSelectElement).value;
  const seed = Number(($("seed") as HTMLInputElement).value) || 0;
  client.startAutonomous(obj, method, seed);
});

$("stop").addEventListener("click", () => client.stop());
$("export").addEventListener("click", () => client.requestTranscript());

// push-back tool: opposes the transport direction (toward plate B)
$("pushback").addEventListener("click", () => {
  const geo = client.geometry;
  if (!geo) return;
  const dir = Math.sign(geo.plate_a_s - geo.plate_b_s); // back toward A
  client.sendPerturb(0.35 * dir, 0, 0.3);
});

// ---- drag teleoperation ---------------------------------------------------

const plane = $("plane") as HTMLCanvasElement;
let dragging = false;
let lastDrag: (DragTarget & { t: number }) | null = null;

function planeViewport(): Viewport {
  return { width: plane.width, height: plane.height };
}

function pointerTarget(ev: PointerEvent): DragTarget | null {
  const geo = client.geometry;
  if (!geo) return null;
  const rect = plane.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * plane.width;
  const y = ((ev.clientY - rect.top) / rect.height) * plane.height;
  return dragToTarget(x, y, taskWindow(geo), planeViewport(), geo);
}

plane.addEventListener("pointerdown", (ev) => {
  dragging = true;
  plane.setPointerCapture(ev.pointerId);
  lastDrag = null;
});

plane.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  const target = pointerTarget(ev);
  if (!target) return;
  const t = performance.now() / 1000;
  const { vyaw, vz } = dragVelocity(lastDrag, target, t);
  if (client.sendMasterTarget(target.yaw, target.z, vyaw, vz)) {
    lastDrag = { ...target, t };
  }
});

plane.addEventListener("pointerup", () => {
  dragging = false;
  lastDrag = null;
});

// ---- rendering ------------------------------------------------------------

function drawPlane(): void {
  const ctx = plane.getContext("2d")!;
  const vp = planeViewport();
  ctx.clearRect(0, 0, vp.width, vp.height);
  const geo = client.geometry;
  const snap = client.latest;
  if (!geo) {
    ctx.fillStyle = "#666";
    ctx.fillText("no session — start collect or autonomous", 16, 24);
    return;
  }
  const win = taskWindow(geo);
  const line = (
    s0: number, z0: number, s1: number, z1: number, style: string,
  ) => {
    const [x0, y0] = toPx(s0, z0, win, vp);
    const [x1, y1] = toPx(s1, z1, win, vp);
    ctx.strokeStyle = style;
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  };

  // desk and plates
  line(win.sMin, geo.desk_z, win.sMax, geo.desk_z, "#999");
  for (const ps of [geo.plate_a_s, geo.plate_b_s]) {
    line(ps - geo.plate_radius, geo.surface_z,
      ps + geo.plate_radius, geo.surface_z, "#333");
  }

  if (snap) {
    // object
    const [ox, oy] = toPx(snap.object.s, snap.object.z, win, vp);
    ctx.fillStyle = snap.object.engaged ? "#2a2" : "#a62";
    ctx.beginPath();
    ctx.arc(ox, oy, 7, 0, Math.PI * 2);
    ctx.fill();

    // spoon tips
    const mt = tipPosition(snap.master.theta, geo);
    const st = tipPosition(snap.slave.theta, geo);
    const [mx, my] = toPx(mt.s, mt.z, win, vp);
    const [sx, sy] = toPx(st.s, st.z, win, vp);
    ctx.fillStyle = "#d33";
    ctx.fillRect(mx - 4, my - 4, 8, 8);
    ctx.fillStyle = "#36d";
    ctx.fillRect(sx - 4, sy - 4, 8, 8);
    ctx.fillStyle = "#222";
    ctx.fillText("master τ " + torqueReadout(snap.master), 8, 14);
    ctx.fillText("slave  τ " + torqueReadout(snap.slave), 8, 28);
  }
}

function drawArm(canvasId: string, theta: number[] | null): void {
  const canvas = $(canvasId) as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const geo = client.geometry;
  if (!geo || !theta) return;
  const pts = armSidePoints(theta, geo);
  const scale = canvas.height / (2.4 * (geo.l1 + geo.l2 + geo.spoon_offset));
  const ox = canvas.width * 0.2;
  const oy = canvas.height * 0.7;
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(ox + pts[0][0] * scale, oy - pts[0][1] * scale);
  for (let i = 1; i < pts.length; i++) {
    ctx.lineTo(ox + pts[i][0] * scale, oy - pts[i][1] * scale);
  }
  ctx.stroke();
  // yaw dial
  ctx.lineWidth = 1;
  const cx = canvas.width - 24;
  const cy = 24;
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.arc(cx, cy, 14, 0, Math.PI * 2);
  ctx.stroke();
  ctx.strokeStyle = "#d33";
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + 14 * Math.sin(theta[0]), cy - 14 * Math.cos(theta[0]));
  ctx.stroke();
}

function render(): void {
  $("banner").style.display = client.stale() ? "block" : "none";
  drawPlane();
  drawArm("master-arm", client.latest?.master.theta ?? null);
  drawArm("slave-arm", client.latest?.slave.theta ?? null);
  const charts = $("charts") as HTMLCanvasElement;
  paint(charts.getContext("2d")!, client.ring, charts.width, charts.height,
    client.annotation());
  requestAnimationFrame(render);
}

connect();
requestAnimationFrame(render);
