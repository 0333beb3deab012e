"""Bilateral and autonomous joint controllers.

The torque references follow the 4ch bilateral law

    tau_ref_m = -Cp_m(th_m - th_s) - Cf(tau_m + tau_s)
    tau_ref_s = +Cp_s(th_m - th_s) - Cf(tau_m + tau_s)

with Cp = (J/2)(Kp + Kd s) realized on response velocities and Cf = Kf/2.
J is the per-joint inertia of the executing robot.  The slave side is one
shared function, ``slave_law``; data collection and autonomous execution
both call it, which is the whole point of the command-value prediction
scheme: identical wiring in both phases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import JointState, RobotParams, Vec3


@dataclass
class GainSet:
    Kp: float = 121.0
    Kd: float = 22.0
    Kf: float = 1.0

    def __post_init__(self) -> None:
        if min(self.Kp, self.Kd, self.Kf) < 0:
            raise ValueError("gains must be non-negative")


class ControlMode(enum.Enum):
    BILATERAL_4CH = "4ch"
    BILATERAL_POSITION_SYMMETRIC = "position-symmetric"
    AUTONOMOUS_SM = "autonomous-sm"
    AUTONOMOUS_SS = "autonomous-ss"
    AUTONOMOUS_POSITION_ONLY = "autonomous-position-only"


AUTONOMOUS_MODES = (ControlMode.AUTONOMOUS_SM, ControlMode.AUTONOMOUS_SS,
                    ControlMode.AUTONOMOUS_POSITION_ONLY)


@dataclass
class BilateralCommand:
    tau_ref_master: Vec3
    tau_ref_slave: Vec3


def slave_law(cmd_theta: Vec3, cmd_omega: Vec3, cmd_tau: Vec3,
              slave: JointState, gains: GainSet, params_s: RobotParams,
              use_force: bool) -> Vec3:
    """Slave torque reference given command values (master responses or
    model predictions)."""
    pos = 0.5 * params_s.J * (gains.Kp * (cmd_theta - slave.theta)
                              + gains.Kd * (cmd_omega - slave.omega))
    if not use_force:
        return pos
    return pos - 0.5 * gains.Kf * (cmd_tau + slave.tau)


def _master_law(master: JointState, slave: JointState, gains: GainSet,
                params_m: RobotParams, use_force: bool) -> Vec3:
    pos = -0.5 * params_m.J * (gains.Kp * (master.theta - slave.theta)
                               + gains.Kd * (master.omega - slave.omega))
    if not use_force:
        return pos
    return pos - 0.5 * gains.Kf * (master.tau + slave.tau)


def bilateral_4ch(master: JointState, slave: JointState, gains: GainSet,
                  params_m: RobotParams, params_s: RobotParams) -> BilateralCommand:
    """Full 4ch law: position synchronization plus force reflection."""
    return BilateralCommand(
        tau_ref_master=_master_law(master, slave, gains, params_m, use_force=True),
        tau_ref_slave=slave_law(master.theta, master.omega, master.tau,
                                slave, gains, params_s, use_force=True),
    )


def bilateral_position_symmetric(master: JointState, slave: JointState,
                                 gains: GainSet, params_m: RobotParams,
                                 params_s: RobotParams) -> BilateralCommand:
    """4ch law with the force channel removed; references ignore torques."""
    return BilateralCommand(
        tau_ref_master=_master_law(master, slave, gains, params_m, use_force=False),
        tau_ref_slave=slave_law(master.theta, master.omega, master.tau,
                                slave, gains, params_s, use_force=False),
    )


def autonomous_slave(predicted: JointState, slave: JointState, gains: GainSet,
                     mode: ControlMode, params_s: RobotParams) -> Vec3:
    """Slave reference with model predictions substituted for master responses.

    Raises on non-finite predictions; the caller must abort the trial and
    flag it as a failure.
    """
    if mode not in AUTONOMOUS_MODES:
        raise ValueError(f"not an autonomous mode: {mode}")
    for v in (predicted.theta, predicted.omega, predicted.tau):
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("non-finite prediction fed to autonomous_slave")
    use_force = mode is not ControlMode.AUTONOMOUS_POSITION_ONLY
    return slave_law(predicted.theta, predicted.omega, predicted.tau,
                     slave, gains, params_s, use_force=use_force)


def collection_mode_for(mode: ControlMode) -> ControlMode:
    """Bilateral control type whose demonstrations feed a given execution mode."""
    if mode is ControlMode.AUTONOMOUS_POSITION_ONLY:
        return ControlMode.BILATERAL_POSITION_SYMMETRIC
    return ControlMode.BILATERAL_4CH
