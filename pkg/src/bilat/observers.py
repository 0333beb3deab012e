"""Velocity estimation and torque observers running at the control cycle.

All three blocks are first-order and discretized with backward Euler:

* pseudo-derivative  g*s/(s+g) for angular velocity,
* disturbance observer (DOB) in the velocity form
  tau_dis_hat = LPF_g(tau_applied + g*J*omega) - g*J*omega,
  which realizes tau_ref - J*dd(theta) without differentiating twice,
* reaction-force observer (RFOB): DOB estimate minus the modeled friction
  and gravity terms, leaving the external torque.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import RobotParams, JointState, Vec3, gravity_torque, friction_torque


@dataclass
class FilterState:
    """One first-order low-pass channel, y' = g*(x - y), backward Euler."""

    cutoff: float
    prev_output: float = 0.0
    prev_input: float = 0.0

    def __post_init__(self) -> None:
        if self.cutoff <= 0:
            raise ValueError("filter cutoff must be positive")

    def update(self, x: float, dt: float) -> float:
        a = self.cutoff * dt
        y = (self.prev_output + a * x) / (1.0 + a)
        self.prev_output = y
        self.prev_input = x
        return y


def pseudo_derivative(theta_sample: float, state: FilterState, dt: float) -> float:
    """Low-pass-filtered differentiation: omega = g * (theta - LPF_g(theta)).

    Equivalent to the transfer function g*s/(s+g).  The filter state must be
    seeded with the initial angle, otherwise the first samples see a step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = state.update(theta_sample, dt)
    return state.cutoff * (theta_sample - y)


@dataclass
class ObserverState:
    """Per-robot observer bank: 3 pseudo-derivative + 3 DOB channels."""

    params: RobotParams               # nominal model (may differ from plant)
    velocity_cutoff: float = 100.0
    dob_cutoff: float = 100.0
    vel_filters: list[FilterState] = field(default_factory=list)
    dob_filters: list[FilterState] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.vel_filters:
            self.vel_filters = [FilterState(self.velocity_cutoff) for _ in range(3)]
        if not self.dob_filters:
            self.dob_filters = [FilterState(self.dob_cutoff) for _ in range(3)]

    def reset(self, theta: Vec3) -> None:
        """Seed filters for a start at rest at ``theta``."""
        for i in range(3):
            self.vel_filters[i].prev_output = float(theta[i])
            self.vel_filters[i].prev_input = float(theta[i])
        g0 = gravity_torque(theta, self.params)
        for i in range(3):
            # at rest tau_dis = gravity, so LPF state = gravity torque
            self.dob_filters[i].prev_output = float(g0[i])
            self.dob_filters[i].prev_input = float(g0[i])

    def estimate_velocity(self, theta: Vec3, dt: float) -> Vec3:
        return np.array([pseudo_derivative(float(theta[i]), self.vel_filters[i], dt)
                         for i in range(3)])


def dob_estimate(tau_applied: Vec3, omega: Vec3, obs: ObserverState,
                 dt: float) -> Vec3:
    """One DOB update per control tick; returns tau_dis_hat.

    ``tau_applied`` is the torque actually sent to the actuator this cycle
    (post clamping), ``omega`` the pseudo-derivative velocity estimate.
    """
    g = obs.dob_cutoff
    gJw = g * obs.params.J * omega
    out = np.empty(3)
    for i in range(3):
        y = obs.dob_filters[i].update(float(tau_applied[i] + gJw[i]), dt)
        out[i] = y - gJw[i]
    return out


def rfob_reaction(tau_dis_hat: Vec3, theta: Vec3, omega: Vec3,
                  params: RobotParams) -> Vec3:
    """External (reaction) torque: DOB estimate minus modeled friction/gravity."""
    return tau_dis_hat - friction_torque(omega, params) - gravity_torque(theta, params)
