"""Fixed-timestep control-loop engine.

One ``SimLoop`` owns everything a trial needs: the plant states, observer
banks, controller wiring, environment, operator profile and (in autonomous
mode) the predictor.  It advances in 1 ms control ticks, each containing an
integer number of physics substeps, and records response values of both
robots at every tick.  All randomness is drawn up front from the trial's
seeded generator, so identical seeds give bit-identical logs.

Torque path per robot and tick:

    responses  = (theta, pseudo-derivative omega, RFOB torque)
    tau_ctrl   = bilateral / autonomous law on responses
    tau_app    = clamp(tau_ctrl + friction/gravity feedforward)

The DOB consumes the previous tick's applied torque, keeping the loop
strictly causal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import controllers
from .config import Config
from .controllers import ControlMode, GainSet, AUTONOMOUS_MODES
from .dynamics import (JointState, RobotParams, SimConfig, Vec3, clamp_torque,
                       forward_kinematics, friction_torque, gravity_torque,
                       step_dynamics, tip_jacobian_planar)
from .observers import ObserverState, dob_estimate, rfob_reaction
from .operator_model import OperatorProfile, joint_targets
from .task import Environment, EnvFrame, OperatorTick, TaskConfig


class Predictor(Protocol):
    """Model-side interface of the autonomous loop (LSTM or playback)."""

    def reset(self) -> None: ...

    def predict(self, slave_response: JointState, t: float) -> JointState: ...


@dataclass
class RobotSim:
    params: RobotParams             # ground-truth plant
    nominal: RobotParams            # controller/observer model
    obs: ObserverState
    state: JointState
    applied: Vec3                   # torque sent last tick
    response: JointState = None     # type: ignore[assignment]

    @classmethod
    def at_pose(cls, theta: Vec3, params: RobotParams, nominal: RobotParams,
                cutoffs: dict) -> "RobotSim":
        obs = ObserverState(params=nominal,
                            velocity_cutoff=cutoffs["velocity_cutoff"],
                            dob_cutoff=cutoffs["dob_cutoff"])
        obs.reset(theta)
        state = JointState(theta.copy(), np.zeros(3), np.zeros(3))
        applied = gravity_torque(theta, nominal)
        return cls(params=params, nominal=nominal, obs=obs, state=state,
                   applied=applied)

    def measure(self, dt: float) -> JointState:
        omega = self.obs.estimate_velocity(self.state.theta, dt)
        tau_dis = dob_estimate(self.applied, omega, self.obs, dt)
        tau_res = rfob_reaction(tau_dis, self.state.theta, omega, self.nominal)
        self.response = JointState(self.state.theta.copy(), omega, tau_res)
        return self.response

    def actuate(self, tau_ctrl: Vec3) -> Vec3:
        comp = (friction_torque(self.response.omega, self.nominal)
                + gravity_torque(self.state.theta, self.nominal))
        self.applied = clamp_torque(tau_ctrl + comp, self.params)
        return self.applied

    def substep(self, tau_ext: Vec3, dt: float) -> None:
        self.state = step_dynamics(self.state, self.applied, tau_ext,
                                   self.params, dt)

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.state.theta))
                    and np.all(np.isfinite(self.state.omega)))


@dataclass
class LoopResult:
    t: np.ndarray                  # (n,)
    master: np.ndarray             # (n, 9) response/command channels
    slave: np.ndarray              # (n, 9)
    env_frames: list[EnvFrame]
    aborted_nonfinite: bool
    model_ticks: list[int] = field(default_factory=list)


class SimLoop:
    def __init__(self, cfg: Config, mode: ControlMode, task_cfg: TaskConfig,
                 profile: OperatorProfile, duration: float,
                 predictor: Predictor | None = None,
                 with_environment: bool = True,
                 prediction_latency: float | None = None):
        self.cfg = cfg
        self.mode = mode
        self.task_cfg = task_cfg
        self.profile = profile
        self.sim = cfg.sim
        self.gains = cfg.gains
        self.predictor = predictor
        self.autonomous = mode in AUTONOMOUS_MODES
        if self.autonomous and predictor is None:
            raise ValueError("autonomous mode needs a predictor")

        cutoffs = cfg.section("observers")
        th0, _ = self._initial_pose()
        self._hold_theta = th0.copy()
        self.slave = RobotSim.at_pose(th0, cfg.slave_params, cfg.slave_params,
                                      cutoffs)
        self.master = None
        if not self.autonomous:
            self.master = RobotSim.at_pose(th0, cfg.master_params,
                                           cfg.master_params, cutoffs)
        self.env = Environment(
            task_cfg, pace_stiffness=profile.pace_stiffness,
            pace_damping=profile.pace_damping,
            drag_cap=profile.drag_cap,
        ) if with_environment else None

        self.n_ticks = int(round(duration / self.sim.control_dt))
        self.model_every = int(round(cfg.model_dt / self.sim.control_dt))
        ex = cfg.section("executor")
        lat = (ex["prediction_latency_s"] if prediction_latency is None
               else prediction_latency)
        self.latency_ticks = int(round(lat / self.sim.control_dt))
        # hidden-state burn-in: the predictor consumes real responses from
        # tick 0 but its outputs only start driving the slave after this
        self.warmup_ticks = int(round(ex.get("warmup_s", 0.0)
                                      / self.sim.control_dt))
        # command setpoint slew limit [rad/s]: the execution stack refuses
        # to chase a predicted setpoint faster than anything a demonstration
        # could contain (standard command-interface safety clamping)
        self.rate_limit = ex.get("command_rate_limit", 0.0) or 0.0
        self._cmd_theta = th0.copy()
        self.held_prediction: JointState | None = None
        self._pending: list[tuple[int, JointState]] = []

        n = self.n_ticks
        self.result = LoopResult(
            t=np.arange(n) * self.sim.control_dt,
            master=np.zeros((n, 9)), slave=np.zeros((n, 9)),
            env_frames=[], aborted_nonfinite=False)
        self.k = 0
        # external (live/injected) inputs
        self.master_target_override: tuple[float, Vec3, Vec3] | None = None
        self.override_timeout = 0.1
        self.perturb_until = -1.0
        self.perturb_force = (0.0, 0.0)
        if self.predictor is not None:
            self.predictor.reset()

    # ------------------------------------------------------------------

    def _initial_pose(self) -> tuple[Vec3, Vec3]:
        yaw, z, dyaw, dz, _ = self.profile.hand_track.eval(0.0)
        return joint_targets(yaw, z, dyaw, dz, self.cfg.slave_params,
                             self.task_cfg.spoon_length)

    def _tip_kinematics(self, robot: RobotSim) -> tuple[float, float, float, float]:
        tcfg = self.task_cfg
        th = robot.state.theta
        om = robot.state.omega
        pos = forward_kinematics(th, robot.params, tcfg.spoon_offset)
        l1, l2 = robot.params.link_lengths
        l2e = l2 + tcfg.spoon_offset
        tip_s = tcfg.arc_radius * th[0]
        tip_vs = tcfg.arc_radius * om[0]
        tip_vz = l1 * math.cos(th[1]) * om[1] + l2e * math.cos(th[2]) * om[2]
        return tip_s, float(pos[2]), tip_vs, tip_vz

    @staticmethod
    def _pack(resp: JointState, out: np.ndarray) -> None:
        out[0:3] = resp.theta
        out[3:6] = resp.omega
        out[6:9] = resp.tau

    # -- external inputs ------------------------------------------------

    def inject_master_target(self, t: float, theta: Vec3, omega: Vec3) -> None:
        self.master_target_override = (t, np.asarray(theta, float),
                                       np.asarray(omega, float))

    def inject_perturb(self, t: float, fs: float, fz: float,
                       duration: float) -> None:
        self.perturb_until = t + duration
        self.perturb_force = (fs, fz)

    # ------------------------------------------------------------------

    def _slew(self, pred: JointState) -> JointState:
        """Clamp a newly adopted prediction so the setpoint cannot move
        faster than ``command_rate_limit`` between model ticks; the held
        command is still constant across intervening control ticks."""
        if self.rate_limit <= 0.0:
            return pred
        lim = self.rate_limit * self.cfg.model_dt
        th = self._cmd_theta + np.clip(pred.theta - self._cmd_theta,
                                       -lim, lim)
        om = np.clip(pred.omega, -self.rate_limit, self.rate_limit)
        return JointState(th, om, pred.tau)

    def tick(self) -> bool:
        """Advance one control tick; returns False when the trial is over
        or aborted."""
        if self.k >= self.n_ticks or self.result.aborted_nonfinite:
            return False
        k = self.k
        t = k * self.sim.control_dt
        dt = self.sim.control_dt

        slave_resp = self.slave.measure(dt)
        master_resp = self.master.measure(dt) if self.master else None

        if not self.slave.finite() or (self.master and not self.master.finite()):
            self.result.aborted_nonfinite = True
            return False

        hand_tau = None
        if self.autonomous:
            if k % self.model_every == 0:
                try:
                    pred = self.predictor.predict(slave_resp, t)
                except FloatingPointError:
                    self.result.aborted_nonfinite = True
                    return False
                if self.latency_ticks == 0:
                    self.held_prediction = self._slew(pred)
                else:
                    self._pending.append((k + self.latency_ticks, pred))
                self.result.model_ticks.append(k)
            while self._pending and self._pending[0][0] <= k:
                self.held_prediction = self._slew(self._pending.pop(0)[1])
            if self.held_prediction is None or k < self.warmup_ticks:
                # warm-up / pre-first-prediction: hold the start pose
                cmd = JointState(self._hold_theta.copy(),
                                 np.zeros(3), np.zeros(3))
            else:
                cmd = self.held_prediction
            self._cmd_theta = cmd.theta.copy()
            try:
                tau_s = controllers.autonomous_slave(
                    cmd, slave_resp, self.gains, self.mode,
                    self.cfg.slave_params)
            except FloatingPointError:
                self.result.aborted_nonfinite = True
                return False
            self._pack(cmd, self.result.master[k])
        else:
            if self.mode is ControlMode.BILATERAL_4CH:
                cmd = controllers.bilateral_4ch(
                    master_resp, slave_resp, self.gains,
                    self.cfg.master_params, self.cfg.slave_params)
            else:
                cmd = controllers.bilateral_position_symmetric(
                    master_resp, slave_resp, self.gains,
                    self.cfg.master_params, self.cfg.slave_params)
            tau_s = cmd.tau_ref_slave
            self.master.actuate(cmd.tau_ref_master)
            hand_tau = self._hand_torque(t)
            self._pack(master_resp, self.result.master[k])

        self.slave.actuate(tau_s)
        self._pack(slave_resp, self.result.slave[k])

        op = OperatorTick.sample(self.profile, t)
        self._physics(t, hand_tau, op)
        if self.env is not None:
            tip = self._tip_kinematics(self.slave)
            self.result.env_frames.append(self.env.frame(t, *tip, op))
        self.k += 1
        return self.k < self.n_ticks

    def _hand_torque(self, t: float) -> Vec3:
        ov = self.master_target_override
        if ov is not None and t - ov[0] <= self.override_timeout:
            th_ref, om_ref = ov[1], ov[2]
            tau = (self.profile.stiffness * (th_ref - self.master.state.theta)
                   + self.profile.damping * (om_ref - self.master.state.omega))
            return np.clip(tau, -self.profile.max_torque, self.profile.max_torque)
        return self.profile.operator_torque_corrected(
            t, self.master.state, self.slave.state.theta)

    def _physics(self, t: float, hand_tau: Vec3 | None, op) -> None:
        """Scalar inner loop over the physics substeps.

        Arithmetic mirrors ``step_dynamics`` exactly (see the equivalence
        test); it is unrolled here because this runs 10^4 times per
        simulated second and small-array numpy overhead dominates otherwise.
        """
        pdt = self.sim.physics_dt
        tcfg = self.task_cfg
        env = self.env
        R = tcfg.arc_radius
        sl = self.slave
        l1, l2 = sl.params.link_lengths
        l2e = l2 + tcfg.spoon_offset
        J0, J1, J2 = sl.params.J
        D = sl.params.D
        gc0, gc1, gc2 = sl.params.g_c
        lim = sl.params.joint_limits
        a0, a1, a2 = sl.applied
        th0, th1, th2 = sl.state.theta
        om0, om1, om2 = sl.state.omega
        perturb_until = self.perturb_until
        pfs, pfz = self.perturb_force

        if self.master is not None:
            m = self.master
            mJ0, mJ1, mJ2 = m.params.J
            mD = m.params.D
            mgc0, mgc1, mgc2 = m.params.g_c
            mlim = m.params.joint_limits
            ma0, ma1, ma2 = m.applied
            mth0, mth1, mth2 = m.state.theta
            mom0, mom1, mom2 = m.state.omega
            h0, h1, h2 = hand_tau

        for i in range(self.sim.substeps):
            e0 = e1 = e2 = 0.0
            if env is not None:
                c1 = math.cos(th1)
                c2 = math.cos(th2)
                tip_s = R * th0
                tip_z = l1 * math.sin(th1) + l2e * math.sin(th2)
                tip_vs = R * om0
                tip_vz = l1 * c1 * om1 + l2e * c2 * om2
                fs, fz = env.step(pdt, tip_s, tip_z, tip_vs, tip_vz, op)
                if t + i * pdt < perturb_until:
                    fs += pfs
                    fz += pfz
                e0 = -(R * fs)
                e1 = -(l1 * c1 * fz)
                e2 = -(l2e * c2 * fz)
            g1 = gc0 * math.cos(th1) + gc1 * math.sin(th2)
            g2 = gc2 * math.sin(th2)
            om0 += (a0 - e0 - D * om0 - 0.0) / J0 * pdt
            om1 += (a1 - e1 - 0.0 - g1) / J1 * pdt
            om2 += (a2 - e2 - 0.0 - g2) / J2 * pdt
            th0 += om0 * pdt
            th1 += om1 * pdt
            th2 += om2 * pdt
            if th0 < lim[0][0]:
                th0 = lim[0][0]
                om0 = max(om0, 0.0)
            elif th0 > lim[0][1]:
                th0 = lim[0][1]
                om0 = min(om0, 0.0)
            if th1 < lim[1][0]:
                th1 = lim[1][0]
                om1 = max(om1, 0.0)
            elif th1 > lim[1][1]:
                th1 = lim[1][1]
                om1 = min(om1, 0.0)
            if th2 < lim[2][0]:
                th2 = lim[2][0]
                om2 = max(om2, 0.0)
            elif th2 > lim[2][1]:
                th2 = lim[2][1]
                om2 = min(om2, 0.0)

            if self.master is not None:
                mg1 = mgc0 * math.cos(mth1) + mgc1 * math.sin(mth2)
                mg2 = mgc2 * math.sin(mth2)
                mom0 += (ma0 - (-h0) - mD * mom0 - 0.0) / mJ0 * pdt
                mom1 += (ma1 - (-h1) - 0.0 - mg1) / mJ1 * pdt
                mom2 += (ma2 - (-h2) - 0.0 - mg2) / mJ2 * pdt
                mth0 += mom0 * pdt
                mth1 += mom1 * pdt
                mth2 += mom2 * pdt
                if mth0 < mlim[0][0]:
                    mth0 = mlim[0][0]
                    mom0 = max(mom0, 0.0)
                elif mth0 > mlim[0][1]:
                    mth0 = mlim[0][1]
                    mom0 = min(mom0, 0.0)
                if mth1 < mlim[1][0]:
                    mth1 = mlim[1][0]
                    mom1 = max(mom1, 0.0)
                elif mth1 > mlim[1][1]:
                    mth1 = mlim[1][1]
                    mom1 = min(mom1, 0.0)
                if mth2 < mlim[2][0]:
                    mth2 = mlim[2][0]
                    mom2 = max(mom2, 0.0)
                elif mth2 > mlim[2][1]:
                    mth2 = mlim[2][1]
                    mom2 = min(mom2, 0.0)

        sl.state.theta[0] = th0
        sl.state.theta[1] = th1
        sl.state.theta[2] = th2
        sl.state.omega[0] = om0
        sl.state.omega[1] = om1
        sl.state.omega[2] = om2
        if self.master is not None:
            m.state.theta[0] = mth0
            m.state.theta[1] = mth1
            m.state.theta[2] = mth2
            m.state.omega[0] = mom0
            m.state.omega[1] = mom1
            m.state.omega[2] = mom2

    def run(self) -> LoopResult:
        while self.tick():
            pass
        return self.result
