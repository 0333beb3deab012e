"""Scoop-and-transport environment in the vertical task plane.

Coordinates: ``s`` is the transport-arc coordinate (arc_radius * yaw) and
``z`` the tip height.  The object is a point mass with penalty-spring
contacts against the plates / desk and a capacity-limited spring coupling
("pocket") to the spoon tip once captured.  The fork hand grips the object
into the pocket, which raises the slip capacity but applies no net force;
pacing and push-back forces are real forces on the object and spoon
respectively.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .operator_model import OperatorProfile

G = 9.81


@dataclass
class ObjectSpec:
    name: str
    mass: float
    stiffness: float
    damping: float
    friction: float
    size: float
    trained: bool

    def __post_init__(self) -> None:
        if min(self.mass, self.stiffness, self.size) <= 0:
            raise ValueError(f"object {self.name}: mass/stiffness/size must be > 0")

    @classmethod
    def from_config(cls, name: str, d: dict) -> "ObjectSpec":
        return cls(name=name, **d)


class FailureMode(enum.Enum):
    NONE = "none"
    DROP = "drop"
    WRONG_DIRECTION = "wrong_direction"
    STALL = "stall"
    CRASH = "crash"
    NONFINITE = "nonfinite"


@dataclass
class SuccessRecord:
    trial_id: str
    method: str
    object_name: str
    scenario: str
    seed: int
    success: bool
    failure_mode: FailureMode
    detail: str = ""

    def __post_init__(self) -> None:
        if self.success != (self.failure_mode is FailureMode.NONE):
            raise ValueError("failure_mode must be 'none' iff success")


@dataclass
class TaskConfig:
    arc_radius: float
    plate_a_yaw: float
    plate_b_yaw: float
    plate_radius: float
    placement_radius: float
    plate_surface_z: float
    plate_height_offset: float
    spoon_length: float
    spoon_length_offset: float
    object_start_yaw: float
    plate_contact_stiffness: float
    plate_contact_damping: float
    plate_friction: float
    ground_drag: float
    pocket_stiffness: float
    pocket_damping: float
    capture_radius: float
    release_radius: float
    pocket_shape_factor: float
    drop_height_threshold: float
    crash_force_threshold: float
    crash_dwell_s: float
    stall_speed_threshold: float
    stall_dwell_s: float
    wrong_direction_speed: float
    wrong_direction_dwell_s: float
    rest_speed_threshold: float
    obj: ObjectSpec = None  # type: ignore[assignment]

    @classmethod
    def from_config(cls, task_cfg: dict, obj: ObjectSpec,
                    scenario_overrides: dict | None = None) -> "TaskConfig":
        d = dict(task_cfg)
        if scenario_overrides:
            d.update(scenario_overrides)
        return cls(obj=obj, **d)

    @property
    def surface_z(self) -> float:
        return self.plate_surface_z + self.plate_height_offset

    @property
    def spoon_offset(self) -> float:
        return self.spoon_length + self.spoon_length_offset

    @property
    def plate_a_s(self) -> float:
        return self.arc_radius * self.plate_a_yaw

    @property
    def plate_b_s(self) -> float:
        return self.arc_radius * self.plate_b_yaw

    @property
    def desk_z(self) -> float:
        return self.surface_z - 0.04


@dataclass
class EnvFrame:
    """Per-control-tick environment sample used for judging."""

    t: float
    obj_s: float
    obj_z: float
    obj_vs: float
    obj_vz: float
    tip_s: float
    tip_z: float
    tip_vs: float
    tip_vz: float
    engaged: bool
    plate_force: float     # |spoon-plate contact force| [N]
    pushback_active: bool


class OperatorTick:
    """Operator-hand quantities sampled once per control tick."""

    __slots__ = ("fork_press", "pace_s_ref", "pace_v_ref", "pace_active",
                 "pushback", "pushback_active")

    def __init__(self, fork_press=0.0, pace_s_ref=0.0, pace_v_ref=0.0,
                 pace_active=False, pushback=0.0, pushback_active=False):
        self.fork_press = fork_press
        self.pace_s_ref = pace_s_ref
        self.pace_v_ref = pace_v_ref
        self.pace_active = pace_active
        self.pushback = pushback
        self.pushback_active = pushback_active

    @classmethod
    def sample(cls, profile: OperatorProfile, t: float) -> "OperatorTick":
        yaw, _, dyaw, _, ph = profile.fork_track.eval(t)
        return cls(
            fork_press=profile.fork_support(t),
            pace_s_ref=profile.arc_radius * yaw,
            pace_v_ref=profile.arc_radius * dyaw,
            pace_active=(ph == "transport"),
            pushback=profile.pushback_force(t),
            pushback_active=profile.pushback_active(t))


class Environment:
    """Owns the object state; stepped at the physics rate."""

    def __init__(self, cfg: TaskConfig, pace_stiffness: float = 0.0,
                 pace_damping: float = 0.0, drag_cap: float = 0.0):
        self.cfg = cfg
        obj = cfg.obj
        self.s = cfg.arc_radius * cfg.object_start_yaw
        self.z = cfg.surface_z + obj.size
        self.vs = 0.0
        self.vz = 0.0
        self.engaged = False
        self.last_plate_force = 0.0
        self.pace_stiffness = pace_stiffness
        self.pace_damping = pace_damping
        self.drag_cap = drag_cap
        # hoisted scalars for the physics-rate inner loop
        self._k_obj = min(obj.stiffness, cfg.plate_contact_stiffness)
        self._c_obj = obj.damping + 0.5
        self._kp = min(cfg.pocket_stiffness, obj.stiffness)
        self._mass = obj.mass
        self._mg = obj.mass * G
        self._size = obj.size
        self._mu_shape = obj.friction * cfg.pocket_shape_factor
        self._sa = cfg.plate_a_s
        self._sb = cfg.plate_b_s
        self._pr = cfg.plate_radius
        self._surf = cfg.surface_z
        self._desk = cfg.desk_z
        self._cap_r = cfg.capture_radius
        self._rel_r = cfg.release_radius
        self._drag = cfg.ground_drag
        self._pd = cfg.pocket_damping

    def capacity(self, fork_press: float) -> float:
        return self._mu_shape * (self._mg + fork_press)

    def step(self, dt: float, tip_s: float, tip_z: float,
             tip_vs: float, tip_vz: float, op: OperatorTick) -> tuple[float, float]:
        """Advance the object by ``dt``; returns the reaction force (fs, fz)
        acting on the spoon tip."""
        fork_press = op.fork_press

        # capture / release
        px = tip_s
        pz = tip_z + 0.6 * self._size
        dx = self.s - px
        dz = self.z - pz
        dist = math.hypot(dx, dz)
        if not self.engaged:
            if fork_press > 0.0 and math.hypot(self.s - tip_s,
                                               self.z - tip_z) < self._cap_r:
                self.engaged = True
        elif dist > self._rel_r or fork_press == 0.0:
            self.engaged = False

        fs = 0.0
        fz = -self._mg
        spoon_fs = 0.0
        spoon_fz = 0.0

        if self.engaged:
            kp = self._kp
            fpx = -kp * dx + self._pd * (tip_vs - self.vs)
            fpz = -kp * dz + self._pd * (tip_vz - self.vz)
            mag = math.hypot(fpx, fpz)
            cap = self._mu_shape * (self._mg + fork_press)
            if mag > cap:
                scale = cap / mag
                fpx *= scale
                fpz *= scale
            fs += fpx
            fz += fpz
            spoon_fs -= fpx
            spoon_fz -= fpz

        # object-plate/desk contact
        on_plate = (abs(self.s - self._sa) < self._pr
                    or abs(self.s - self._sb) < self._pr)
        surf = self._surf if on_plate else self._desk
        pen = surf - (self.z - self._size)
        if pen > 0.0:
            cfz = self._k_obj * pen - self._c_obj * self.vz
            if cfz > 0.0:
                fz += cfz
                fs += -self._drag * self.vs

        if op.pace_active:
            f = (self.pace_stiffness * (op.pace_s_ref - self.s)
                 + self.pace_damping * (op.pace_v_ref - self.vs))
            if f > self.drag_cap:
                f = self.drag_cap
            elif f < -self.drag_cap:
                f = -self.drag_cap
            fs += f

        inv_m_dt = dt / self._mass
        self.vs += fs * inv_m_dt
        self.vz += fz * inv_m_dt
        self.s += self.vs * dt
        self.z += self.vz * dt

        # spoon-plate contact (crash loads)
        on_plate = (abs(tip_s - self._sa) < self._pr
                    or abs(tip_s - self._sb) < self._pr)
        surf = self._surf if on_plate else self._desk
        pen = surf - tip_z
        pf = 0.0
        if pen > 0.0:
            pf = (self.cfg.plate_contact_stiffness * pen
                  - self.cfg.plate_contact_damping * tip_vz)
            if pf < 0.0:
                pf = 0.0
            spoon_fz += pf
            # Coulomb friction at the tip-plate contact (tanh-regularized):
            # a spoon pressed hard into the plate cannot slide sideways, so
            # crashing has a physical consequence rather than just a label
            spoon_fs -= (self.cfg.plate_friction * pf
                         * math.tanh(tip_vs / 0.02))
        self.last_plate_force = pf

        spoon_fs += op.pushback
        return spoon_fs, spoon_fz

    def frame(self, t: float, tip_s: float, tip_z: float, tip_vs: float,
              tip_vz: float, op: OperatorTick) -> EnvFrame:
        return EnvFrame(
            t=t, obj_s=self.s, obj_z=self.z, obj_vs=self.vs, obj_vz=self.vz,
            tip_s=tip_s, tip_z=tip_z, tip_vs=tip_vs, tip_vz=tip_vz,
            engaged=self.engaged, plate_force=self.last_plate_force,
            pushback_active=op.pushback_active)


def judge_success(frames: list[EnvFrame], cfg: TaskConfig, *,
                  trial_id: str, method: str, scenario: str, seed: int,
                  aborted_nonfinite: bool = False) -> SuccessRecord:
    """Pure fold over the environment log; first-trigger failure taxonomy."""
    if not frames:
        return SuccessRecord(trial_id, method, cfg.obj.name, scenario, seed,
                             False, FailureMode.NONFINITE, "empty log")
    if aborted_nonfinite:
        return SuccessRecord(trial_id, method, cfg.obj.name, scenario, seed,
                             False, FailureMode.NONFINITE, "non-finite state")

    # success is an endpoint property: the object at rest on plate B.  The
    # motion-quality modes below (drop / wrong_direction / stall) only
    # classify unsuccessful trials, so a mid-trial retry (e.g. backing up
    # to re-scoop) does not condemn a trial that ultimately completes.  A
    # crash is the exception: a sustained over-force contact is physical
    # damage and fails the trial even if the object still arrives.
    last = frames[-1]
    rest_speed = math.hypot(last.obj_vs, last.obj_vz)
    placed = (abs(last.obj_s - cfg.plate_b_s) < cfg.placement_radius
              and abs(last.obj_z - (cfg.surface_z + cfg.obj.size)) < 0.02
              and rest_speed < cfg.rest_speed_threshold
              and not last.engaged)

    dt = frames[1].t - frames[0].t if len(frames) > 1 else 1e-3
    crash_n = int(round(cfg.crash_dwell_s / dt))
    wrong_n = int(round(cfg.wrong_direction_dwell_s / dt))
    stall_n = int(round(cfg.stall_dwell_s / dt))
    transport_sign = math.copysign(1.0, cfg.plate_b_s - cfg.plate_a_s)

    crash_run = 0
    for f in frames:
        crash_run = crash_run + 1 if f.plate_force > cfg.crash_force_threshold else 0
        if crash_run >= crash_n:
            return SuccessRecord(
                trial_id, method, cfg.obj.name, scenario, seed, False,
                FailureMode.CRASH,
                f"plate force > {cfg.crash_force_threshold} N at t={f.t:.3f}")

    if placed:
        return SuccessRecord(trial_id, method, cfg.obj.name, scenario, seed,
                             True, FailureMode.NONE)

    wrong_run = stall_run = 0
    ever_engaged = False
    failure: tuple[FailureMode, str] | None = None

    for f in frames:
        ever_engaged = ever_engaged or f.engaged
        near_b = abs(f.tip_s - cfg.plate_b_s) < cfg.placement_radius

        far_from_plates = (abs(f.obj_s - cfg.plate_a_s) > cfg.plate_radius
                           and abs(f.obj_s - cfg.plate_b_s) > cfg.plate_radius)
        if (ever_engaged and not f.engaged and far_from_plates
                and f.obj_z - cfg.obj.size
                < cfg.surface_z - cfg.drop_height_threshold):
            failure = (FailureMode.DROP, f"object fell at t={f.t:.3f}")
            break

        opposing = f.tip_vs * transport_sign < -cfg.wrong_direction_speed
        if f.engaged and not near_b and opposing and not f.pushback_active:
            wrong_run += 1
        else:
            wrong_run = 0
        if wrong_run >= wrong_n:
            failure = (FailureMode.WRONG_DIRECTION,
                       f"moved against transport at t={f.t:.3f}")
            break

        tip_speed = math.hypot(f.tip_vs, f.tip_vz)
        if f.engaged and not near_b and tip_speed < cfg.stall_speed_threshold \
                and not f.pushback_active:
            stall_run += 1
        else:
            stall_run = 0
        if stall_run >= stall_n:
            failure = (FailureMode.STALL, f"tip stalled at t={f.t:.3f}")
            break

    if failure is None:
        failure = (FailureMode.STALL, "task not completed within trial time")

    return SuccessRecord(trial_id, method, cfg.obj.name, scenario, seed,
                         False, failure[0], failure[1])
