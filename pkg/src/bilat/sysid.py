"""Offline identification of the rigid-body parameters from free motion.

A PD loop tracks per-joint multi-sine position references while the total
applied torque is logged; with nothing touching the arm the logged torque
must equal the model torque, so each joint gives an ordinary linear
least-squares problem:

    joint 1:  tau1 = J1*acc1 + D*vel1
    joint 2:  tau2 = J2*acc2 + g_c1*cos(th2) + g_c2*sin(th3)
    joint 3:  tau3 = J3*acc3 + g_c3*sin(th3)

Velocities and accelerations come from zero-phase (forward-backward)
filtering of the position log followed by central differences; the whole
procedure is offline so acausal smoothing is fine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import filtfilt

from .dynamics import (JointState, RobotParams, SimConfig, clamp_torque,
                       gravity_torque, step_dynamics)

# Incommensurate base frequencies (Hz) per joint; three sines each.
_BASE_FREQS = (
    (0.21, 0.47, 0.89),
    (0.17, 0.53, 0.97),
    (0.23, 0.59, 1.03),
)


class IdentificationError(RuntimeError):
    """Raised when a regression is unusable (rank deficient / ill-conditioned)."""


@dataclass
class ExcitationSchedule:
    """Multi-sine position references tracked by a stiff PD loop."""

    duration: float = 30.0
    amplitudes: tuple[float, float, float] = (0.9, 0.7, 0.7)
    freqs: tuple[tuple[float, float, float], ...] = _BASE_FREQS
    # Soft gains: tracking accuracy is irrelevant, but a clamped (bang-bang)
    # torque log wrecks the smoothed-acceleration fit, so stay well inside
    # the torque limit.
    kp: float = 3.0
    kd: float = 0.4
    margin: float = 0.15          # keep clear of the hard stops by this much
    max_retries: int = 6


@dataclass
class MotionLog:
    """1 kHz record of an excitation run."""

    dt: float
    tau: np.ndarray               # (n, 3) applied torque, post-clamp
    theta: np.ndarray             # (n, 3)
    omega: np.ndarray             # (n, 3) true plant velocity (kept for debugging)
    events: list[str] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return self.tau.shape[0] * self.dt


@dataclass
class IdentificationResult:
    params_hat: RobotParams
    residual_rms: np.ndarray      # (3,) N·m
    condition_numbers: tuple[float, float, float]

    def __post_init__(self):
        if not np.all(np.isfinite(self.residual_rms)):
            raise ValueError("residual_rms must be finite")

    def to_config_fragment(self) -> dict:
        """Milli-unit dict pluggable under ``robots.<name>`` in a config file."""
        p = self.params_hat
        return {
            "J_mkgm2": [round(v * 1e3, 6) for v in p.J],
            "g_c_mNm": [round(v * 1e3, 6) for v in p.g_c],
            "D_mkgm2s": round(p.D * 1e3, 6),
        }


def _reference(schedule: ExcitationSchedule, phases: np.ndarray,
               t: np.ndarray) -> np.ndarray:
    """(n, 3) joint position references, zero at t=0."""
    ref = np.zeros((t.size, 3))
    for j in range(3):
        a = schedule.amplitudes[j] / 3.0
        for k, f in enumerate(schedule.freqs[j]):
            ph = phases[j, k]
            ref[:, j] += a * (np.sin(2 * math.pi * f * t + ph) - math.sin(ph))
    return ref


def excite_and_record(params: RobotParams, schedule: ExcitationSchedule,
                      seed: int, sim: SimConfig | None = None) -> MotionLog:
    """Run the excitation on a free (unloaded) plant and log at 1 kHz.

    If the motion reaches a hard stop the run is restarted with the
    amplitudes scaled down and the retreat is recorded in ``log.events``.
    """
    if max(schedule.amplitudes) <= 0.0:
        raise IdentificationError("zero-amplitude excitation: system unexcited")
    sim = sim or SimConfig()
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * math.pi, size=(3, 3))
    n = int(round(schedule.duration / sim.control_dt))
    t = np.arange(n) * sim.control_dt

    amps = np.asarray(schedule.amplitudes, dtype=float)
    events: list[str] = []
    for attempt in range(schedule.max_retries + 1):
        sched = ExcitationSchedule(schedule.duration, tuple(amps),
                                   schedule.freqs, schedule.kp, schedule.kd)
        ref = _reference(sched, phases, t)
        dref = np.vstack([np.gradient(ref[:, j], sim.control_dt)
                          for j in range(3)]).T
        state = JointState.zero()
        tau_log = np.empty((n, 3))
        th_log = np.empty((n, 3))
        om_log = np.empty((n, 3))
        hit = False
        stop = np.array([hi - schedule.margin for _, hi in params.joint_limits])
        for k in range(n):
            tau = (schedule.kp * (ref[k] - state.theta)
                   + schedule.kd * (dref[k] - state.omega)
                   + gravity_torque(state.theta, params))
            tau = clamp_torque(tau, params)
            tau_log[k] = tau
            th_log[k] = state.theta
            om_log[k] = state.omega
            for _ in range(sim.substeps):
                state = step_dynamics(state, tau, np.zeros(3), params,
                                      sim.physics_dt)
            if np.any(np.abs(state.theta) > stop):
                hit = True
                break
        if not hit:
            return MotionLog(sim.control_dt, tau_log, th_log, om_log, events)
        amps *= 0.7
        events.append("limit reached on attempt %d; amplitudes scaled to %s"
                      % (attempt + 1, np.round(amps, 4).tolist()))
    raise IdentificationError("excitation kept hitting joint limits: %s"
                              % "; ".join(events))


def _zero_phase(x: np.ndarray, dt: float, cutoff_hz: float = 30.0) -> np.ndarray:
    """Forward-backward first-order low-pass along axis 0 (no phase lag)."""
    a = 2 * math.pi * cutoff_hz * dt
    alpha = a / (1.0 + a)
    return filtfilt([alpha], [1.0, -(1.0 - alpha)], x, axis=0)


def differentiate(theta: np.ndarray, dt: float,
                  cutoff_hz: float = 30.0) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed (velocity, acceleration) from a position log."""
    th = _zero_phase(theta, dt, cutoff_hz)
    vel = np.gradient(th, dt, axis=0)
    acc = np.gradient(_zero_phase(vel, dt, cutoff_hz), dt, axis=0)
    return vel, acc


def identify_from_signals(tau: np.ndarray, theta: np.ndarray,
                          omega: np.ndarray, acc: np.ndarray,
                          trim: int = 0) -> IdentificationResult:
    """Per-joint least squares on prepared signals.

    ``trim`` samples are dropped from both ends (filter edge effects).
    """
    if trim:
        sl = slice(trim, -trim)
        tau, theta, omega, acc = tau[sl], theta[sl], omega[sl], acc[sl]

    regressors = [
        np.column_stack([acc[:, 0], omega[:, 0]]),
        np.column_stack([acc[:, 1], np.cos(theta[:, 1]), np.sin(theta[:, 2])]),
        np.column_stack([acc[:, 2], np.sin(theta[:, 2])]),
    ]
    conds = []
    sols = []
    res_rms = np.empty(3)
    for j, A in enumerate(regressors):
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise IdentificationError(
                "joint %d regressor is rank deficient (unexcited)" % (j + 1))
        cond = float(np.linalg.cond(A))
        if cond > 1e6:
            scales = np.abs(A).max(axis=0)
            raise IdentificationError(
                "joint %d regressor ill-conditioned (cond=%.3g); "
                "column scales %s" % (j + 1, cond, np.round(scales, 6).tolist()))
        conds.append(cond)
        x, *_ = np.linalg.lstsq(A, tau[:, j], rcond=None)
        sols.append(x)
        res_rms[j] = float(np.sqrt(np.mean((A @ x - tau[:, j]) ** 2)))

    params_hat = RobotParams(
        J=np.array([sols[0][0], sols[1][0], sols[2][0]]),
        D=float(sols[0][1]),
        g_c=np.array([sols[1][1], sols[1][2], sols[2][1]]),
    )
    return IdentificationResult(params_hat, res_rms,
                                (conds[0], conds[1], conds[2]))


def identify(log: MotionLog, cutoff_hz: float = 30.0) -> IdentificationResult:
    """Full pipeline: zero-phase differentiation, then per-joint regression."""
    if log.duration < 10.0:
        raise IdentificationError("log too short: %.1f s < 10 s" % log.duration)
    vel, acc = differentiate(log.theta, log.dt, cutoff_hz)
    trim = int(round(0.5 / log.dt))
    return identify_from_signals(log.tau, log.theta, vel, acc, trim=trim)
