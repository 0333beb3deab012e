"""Synthetic human operator.

Two "hands" share one task script: the master-holding hand tracks a
minimum-jerk reference through jittered waypoints with a spring-damper
grip, and the fork hand supports the object (extra pocket capacity),
paces it during transport, and can shove the spoon back on schedule.

The hands carry independent timing jitter, so demonstrations naturally
contain small pace mismatches between robot and human; under 4ch force
reflection the master hand yields to those mismatches, which is the
behavior the learner is supposed to pick up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import JointState, RobotParams, Vec3


def min_jerk(x0: float, x1: float, t0: float, t1: float, t: float) -> tuple[float, float]:
    """Minimum-jerk interpolation; returns (position, velocity)."""
    if t <= t0:
        return x0, 0.0
    if t >= t1:
        return x1, 0.0
    T = t1 - t0
    r = (t - t0) / T
    s = r**3 * (10 - 15 * r + 6 * r * r)
    ds = (30 * r**2 - 60 * r**3 + 30 * r**4) / T
    return x0 + (x1 - x0) * s, (x1 - x0) * ds


@dataclass
class Waypoint:
    t: float
    yaw: float
    z: float
    phase: str


class WaypointTrack:
    """Piecewise minimum-jerk track through (yaw, z) waypoints."""

    def __init__(self, waypoints: list[Waypoint]):
        if any(b.t <= a.t for a, b in zip(waypoints, waypoints[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        self.wp = waypoints

    def eval(self, t: float) -> tuple[float, float, float, float, str]:
        """(yaw, z, dyaw, dz, phase) at time t; holds the end poses."""
        wp = self.wp
        if t <= wp[0].t:
            return wp[0].yaw, wp[0].z, 0.0, 0.0, wp[0].phase
        if t >= wp[-1].t:
            return wp[-1].yaw, wp[-1].z, 0.0, 0.0, wp[-1].phase
        for a, b in zip(wp, wp[1:]):
            if t < b.t:
                yaw, dyaw = min_jerk(a.yaw, b.yaw, a.t, b.t, t)
                z, dz = min_jerk(a.z, b.z, a.t, b.t, t)
                return yaw, z, dyaw, dz, b.phase
        raise AssertionError("unreachable")

    def phase_window(self, phase: str) -> tuple[float, float]:
        times = [w.t for w in self.wp if w.phase == phase]
        if not times:
            return math.inf, math.inf
        idx = min(i for i, w in enumerate(self.wp) if w.phase == phase)
        start = self.wp[idx - 1].t if idx > 0 else self.wp[0].t
        return start, max(times)


def _jittered_track(base: list[list], rng: np.random.Generator,
                    timing_sigma: float, amp_sigma: float,
                    speed_scale: float, arc_radius: float) -> WaypointTrack:
    """Per-trial realization of the task script."""
    n = len(base)
    dt = rng.normal(0.0, timing_sigma, size=n)
    dyaw = rng.normal(0.0, amp_sigma, size=n)
    dz = rng.normal(0.0, amp_sigma * arc_radius * 0.5, size=n)
    wps: list[Waypoint] = []
    t_prev = -math.inf
    for i, (t, yaw, z, phase) in enumerate(base):
        tj = t / speed_scale
        if 0 < i < n - 1:
            tj += float(dt[i])
            yaw += float(dyaw[i])
            z += float(dz[i])
        elif i == n - 1:
            tj = base[-1][0] / speed_scale
        t_prev = max(tj, t_prev + 0.1)
        wps.append(Waypoint(t_prev, yaw, z, phase))
    return WaypointTrack(wps)


def joint_targets(yaw: float, z: float, dyaw: float, dz: float,
                  params: RobotParams, spoon_length: float) -> tuple[Vec3, Vec3]:
    """Map a (yaw, z) tip target to joint angles, splitting z equally over
    the two pitch joints."""
    l1, l2 = params.link_lengths
    reach = l1 + l2 + spoon_length
    zz = max(-0.99 * reach, min(0.99 * reach, z))
    pitch = math.asin(zz / reach)
    dpitch = dz / (reach * math.cos(pitch))
    return (np.array([yaw, pitch, pitch]),
            np.array([dyaw, dpitch, dpitch]))


@dataclass
class OperatorProfile:
    """One trial's realization of the synthetic human."""

    hand_track: WaypointTrack           # master-hand schedule
    fork_track: WaypointTrack           # fork-hand schedule (independent jitter)
    stiffness: float
    damping: float
    max_torque: float
    fork_press: float                   # steady pocket-support force [N]
    fork_max_force: float
    pace_stiffness: float
    pace_damping: float
    drag_cap: float
    pushback: list[tuple[float, float, float]]  # (start, duration, magnitude)
    params: RobotParams
    spoon_length: float
    arc_radius: float
    # visible-slave correction: the human watches the slave tip and slowly
    # shifts the hand target to cancel steady offsets (gravity sag, loads)
    vis_gain: float = 1.0
    vis_cutoff: float = 12.0
    _vis_state: np.ndarray = field(default_factory=lambda: np.zeros(3))
    _vis_t: float = field(default=0.0)

    @classmethod
    def sample(cls, op_cfg: dict, rng: np.random.Generator, params: RobotParams,
               spoon_length: float, arc_radius: float,
               speed_scale: float | None = None,
               fork_speed_scale: float | None = None) -> "OperatorProfile":
        """Draw one trial's jittered profile.  RNG consumption order is
        fixed: hand track first, then fork track."""
        ss = op_cfg["speed_scale"] if speed_scale is None else speed_scale
        fss = ss if fork_speed_scale is None else fork_speed_scale
        hand = _jittered_track(op_cfg["waypoints"], rng, op_cfg["timing_jitter_s"],
                               op_cfg["amplitude_jitter_rad"], ss, arc_radius)
        fork = _jittered_track(op_cfg["waypoints"], rng, op_cfg["timing_jitter_s"],
                               op_cfg["amplitude_jitter_rad"], fss, arc_radius)
        fk = op_cfg["fork"]
        return cls(hand_track=hand, fork_track=fork,
                   stiffness=op_cfg["hand_stiffness"],
                   damping=op_cfg["hand_damping"],
                   max_torque=op_cfg["max_torque"],
                   fork_press=fk["press_force"], fork_max_force=fk["max_force"],
                   pace_stiffness=fk["pace_stiffness"], pace_damping=fk["pace_damping"],
                   drag_cap=fk["drag_cap"],
                   pushback=[tuple(p) for p in op_cfg.get("pushback", [])],
                   params=params, spoon_length=spoon_length, arc_radius=arc_radius)

    # -- master hand ------------------------------------------------------

    def master_reference(self, t: float) -> tuple[Vec3, Vec3]:
        yaw, z, dyaw, dz, _ = self.hand_track.eval(t)
        return joint_targets(yaw, z, dyaw, dz, self.params, self.spoon_length)

    def operator_torque(self, t: float, master: JointState) -> Vec3:
        """Hand torque on the master (in accelerating sign; the caller maps
        it to the dynamics' disturbance convention)."""
        th_ref, om_ref = self.master_reference(t)
        tau = (self.stiffness * (th_ref - master.theta)
               + self.damping * (om_ref - master.omega))
        return np.clip(tau, -self.max_torque, self.max_torque)

    def operator_torque_corrected(self, t: float, master: JointState,
                                  slave_theta: Vec3) -> Vec3:
        """Hand torque with the visual slave-offset correction applied.

        Must be called once per control tick in time order (the correction
        low-pass filter is stateful).
        """
        th_ref, om_ref = self.master_reference(t)
        dt = max(t - self._vis_t, 1e-4)
        self._vis_t = t
        err = np.clip(th_ref - slave_theta, -0.4, 0.4)
        a = self.vis_cutoff * dt
        self._vis_state = (self._vis_state + a * err) / (1.0 + a)
        target = th_ref + self.vis_gain * self._vis_state
        tau = (self.stiffness * (target - master.theta)
               + self.damping * (om_ref - master.omega))
        return np.clip(tau, -self.max_torque, self.max_torque)

    def phase(self, t: float) -> str:
        return self.hand_track.eval(t)[4]

    # -- fork hand --------------------------------------------------------

    def fork_support(self, t: float) -> float:
        """Pocket press force, active from scoop through place."""
        ph = self.fork_track.eval(t)[4]
        if ph in ("scoop", "lift", "transport", "place"):
            return min(self.fork_press, self.fork_max_force)
        return 0.0

    def fork_pace_force(self, t: float, s_obj: float, v_obj: float) -> float:
        """Transport-direction pacing force the fork exerts on the carried
        object (and spoon): a capped spring toward the fork hand's own
        schedule."""
        yaw, _, dyaw, _, ph = self.fork_track.eval(t)
        if ph != "transport":
            return 0.0
        s_ref = self.arc_radius * yaw
        v_ref = self.arc_radius * dyaw
        f = self.pace_stiffness * (s_ref - s_obj) + self.pace_damping * (v_ref - v_obj)
        return float(np.clip(f, -self.drag_cap, self.drag_cap))

    def pushback_force(self, t: float) -> float:
        """Scheduled shove on the spoon along +s (against transport)."""
        total = 0.0
        for start, dur, mag in self.pushback:
            if start <= t < start + dur:
                total += mag
        return total

    def pushback_active(self, t: float, margin: float = 0.2) -> bool:
        return any(start - margin <= t < start + dur + margin
                   for start, dur, mag in self.pushback)
