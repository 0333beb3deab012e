"""Rigid-joint dynamics of one 3-DoF desk manipulator and spoon-tip kinematics.

The joint model is deliberately diagonal: joint 1 is a base yaw with viscous
friction, joints 2 and 3 are pitch links with the gravity torque structure

    J1*dd(th1) = tau1 - tau1_ext - D*d(th1)
    J2*dd(th2) = tau2 - tau2_ext - g_c1*cos(th2) - g_c2*sin(th3)
    J3*dd(th3) = tau3 - tau3_ext - g_c3*sin(th3)

``tau_ext`` carries every externally applied torque (environment contact,
operator hand) in the same sign convention as the friction/gravity terms:
positive tau_ext decelerates the joint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64


def vec3(a, b=None, c=None) -> Vec3:
    """Build a 3-vector; accepts three scalars or one iterable."""
    if b is None:
        out = np.asarray(a, dtype=np.float64)
    else:
        out = np.array([a, b, c], dtype=np.float64)
    if out.shape != (3,):
        raise ValueError(f"expected 3 entries, got shape {out.shape}")
    return out


def _check_finite(name: str, v: np.ndarray) -> None:
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite value in {name}: {v}")


@dataclass
class JointState:
    """Response triple of one robot: angle, angular velocity, applied torque."""

    theta: Vec3
    omega: Vec3
    tau: Vec3

    @classmethod
    def zero(cls) -> "JointState":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))

    def copy(self) -> "JointState":
        return JointState(self.theta.copy(), self.omega.copy(), self.tau.copy())


@dataclass
class RobotParams:
    """Physical parameters, SI units (Table-style milli units are converted
    at the config boundary, never here)."""

    J: Vec3                      # joint inertias [kg m^2]
    D: float                     # viscous friction, joint 1 only [kg m^2/s]
    g_c: Vec3                    # gravity coefficients g_c1..g_c3 [N m]
    link_lengths: tuple[float, float] = (0.135, 0.135)
    joint_limits: tuple[tuple[float, float], ...] = (
        (-2.5, 2.5), (-2.5, 2.5), (-2.5, 2.5))
    torque_limit: float = 0.3    # [N m], applied command clamp

    def __post_init__(self) -> None:
        self.J = vec3(self.J)
        self.g_c = vec3(self.g_c)
        if np.any(self.J <= 0):
            raise ValueError(f"inertias must be positive, got {self.J}")
        if self.D < 0:
            raise ValueError("friction coefficient D must be >= 0")
        if self.torque_limit <= 0:
            raise ValueError("torque_limit must be positive")


@dataclass
class SimConfig:
    physics_dt: float = 1e-4
    control_dt: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        ratio = self.control_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError("control_dt must be an integer multiple of physics_dt")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))


def gravity_torque(theta: Vec3, params: RobotParams) -> Vec3:
    """Configuration-dependent gravity torques (the subtracted terms)."""
    return np.array([
        0.0,
        params.g_c[0] * math.cos(theta[1]) + params.g_c[1] * math.sin(theta[2]),
        params.g_c[2] * math.sin(theta[2]),
    ])


def friction_torque(omega: Vec3, params: RobotParams) -> Vec3:
    """Viscous friction; joint 1 only, as the model equations write it."""
    return np.array([params.D * omega[0], 0.0, 0.0])


def clamp_torque(tau: Vec3, params: RobotParams) -> Vec3:
    return np.clip(tau, -params.torque_limit, params.torque_limit)


def step_dynamics(state: JointState, tau_ref: Vec3, tau_ext: Vec3,
                  params: RobotParams, dt: float) -> JointState:
    """Advance one robot by ``dt`` with semi-implicit Euler.

    ``tau_ref`` is clamped to the actuator limit before use; ``tau_ext`` is
    not (the environment is not an actuator).  Joint limits act as hard
    stops: the angle is clamped and the velocity zeroed on contact.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    for name, v in (("theta", state.theta), ("omega", state.omega),
                    ("tau_ref", tau_ref), ("tau_ext", tau_ext)):
        _check_finite(name, v)

    tau = clamp_torque(tau_ref, params)
    acc = (tau - tau_ext - friction_torque(state.omega, params)
           - gravity_torque(state.theta, params)) / params.J
    omega = state.omega + acc * dt
    theta = state.theta + omega * dt

    for i, (lo, hi) in enumerate(params.joint_limits):
        if theta[i] < lo:
            theta[i] = lo
            if omega[i] < 0:
                omega[i] = 0.0
        elif theta[i] > hi:
            theta[i] = hi
            if omega[i] > 0:
                omega[i] = 0.0

    return JointState(theta, omega, tau)


def forward_kinematics(theta: Vec3, params: RobotParams,
                       spoon_offset: float = 0.0) -> np.ndarray:
    """Tip position (x, y, z) of the yaw + two-pitch chain.

    At theta = 0 the chain is straight and horizontal, so the tip sits at
    distance L1 + L2 + spoon_offset from the base.  The spoon is a rigid
    extension of the distal link.
    """
    l1, l2 = params.link_lengths
    l2e = l2 + spoon_offset
    reach = l1 * math.cos(theta[1]) + l2e * math.cos(theta[2])
    z = l1 * math.sin(theta[1]) + l2e * math.sin(theta[2])
    return np.array([reach * math.cos(theta[0]),
                     reach * math.sin(theta[0]),
                     z])


def tip_jacobian_planar(theta: Vec3, params: RobotParams,
                        spoon_offset: float, arc_radius: float) -> np.ndarray:
    """2x3 Jacobian of the planar task coordinates (s, z) w.r.t. joints.

    ``s = arc_radius * theta1`` is the transport-arc coordinate, ``z`` the
    tip height from forward_kinematics.
    """
    l1, l2 = params.link_lengths
    l2e = l2 + spoon_offset
    return np.array([
        [arc_radius, 0.0, 0.0],
        [0.0, l1 * math.cos(theta[1]), l2e * math.cos(theta[2])],
    ])
