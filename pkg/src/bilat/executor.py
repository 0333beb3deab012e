"""Autonomous execution and event-sourced trial running.

Every 20 ms the slave's response values go through the model; the
prediction is held as the slave's command values until the next model tick
(zero-order hold) while the 1 ms slave controller keeps running.  The same
entry point also runs bilateral collection trials so both paths share one
loop, one logging format and one event mechanism.

External inputs (UI teleoperation, scripted perturbations) are ``Event``
records applied strictly at control-tick boundaries, so a saved event list
replays to a bit-identical trial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .controllers import ControlMode
from .dataset import Trial, _channel_slice, record_trial
from .dynamics import JointState
from .loops import LoopResult, SimLoop
from .operator_model import OperatorProfile
from .seqmodel import HiddenState, ModelWeights, forward_step
from .task import SuccessRecord, TaskConfig, judge_success
from .variants import MethodVariant


class LSTMPredictor:
    """Wraps ModelWeights behind the loop's Predictor interface."""

    def __init__(self, weights: ModelWeights):
        self.weights = weights
        v = weights.variant
        self.in_cols = _channel_slice(v, "slave")
        self.out_cols = _channel_slice(v, "master" if v.targets_master
                                       else "slave")
        self.state = HiddenState.zero(weights.hidden)

    def reset(self) -> None:
        self.state = HiddenState.zero(self.weights.hidden)

    def predict(self, slave_response: JointState, t: float) -> JointState:
        stats = self.weights.stats
        raw = np.concatenate([slave_response.theta, slave_response.omega,
                              slave_response.tau])
        # in_cols index the 18-channel layout; slave channels sit at 9..17
        x = (raw[self.in_cols - 9] - stats.mean[self.in_cols]) \
            / stats.std[self.in_cols]
        y, self.state = forward_step(self.weights, x, self.state)
        out = y * stats.std[self.out_cols] + stats.mean[self.out_cols]
        theta, omega = out[0:3], out[3:6]
        tau = out[6:9] if out.size == 9 else np.zeros(3)
        return JointState(theta, omega, tau)


class PlaybackPredictor:
    """Replays a recorded trajectory as the 'model' (wiring-equivalence rig)."""

    def __init__(self, trial: Trial, source: str = "master"):
        self.data = trial.master if source == "master" else trial.slave
        self.dt = float(trial.t[1] - trial.t[0])

    def reset(self) -> None:
        pass

    def predict(self, slave_response: JointState, t: float) -> JointState:
        k = min(int(round(t / self.dt)), self.data.shape[0] - 1)
        row = self.data[k]
        return JointState(row[0:3].copy(), row[3:6].copy(), row[6:9].copy())


@dataclass
class Event:
    """Timestamped external input, applied at the next control tick."""

    t: float
    kind: str                    # master_target | perturb
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(float(d["t"]), d["kind"], d.get("payload", {}))


def save_events(events: list[Event], path: str | Path) -> None:
    lines = [json.dumps(e.to_dict(), sort_keys=True) for e in events]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_events(path: str | Path) -> list[Event]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(Event.from_dict(json.loads(line)))
    return out


def _apply_event(loop: SimLoop, ev: Event) -> None:
    p = ev.payload
    if ev.kind == "master_target":
        loop.inject_master_target(ev.t, np.asarray(p["theta"], float),
                                  np.asarray(p.get("omega", [0, 0, 0]), float))
    elif ev.kind == "perturb":
        loop.inject_perturb(ev.t, float(p["fs"]), float(p["fz"]),
                            float(p.get("duration", 0.1)))
    else:
        raise ValueError("unknown event kind %r" % ev.kind)


def run_trial(cfg: Config, mode: ControlMode, task_cfg: TaskConfig,
              profile: OperatorProfile, duration: float,
              predictor=None, events: list[Event] | None = None,
              prediction_latency: float | None = None,
              meta: dict | None = None,
              on_tick=None) -> tuple[Trial, LoopResult]:
    """Run one trial (bilateral or autonomous) with optional injected events.

    ``on_tick(loop)`` runs after every control tick (interactive streaming
    hook); headless runs leave it None.
    """
    loop = SimLoop(cfg, mode, task_cfg, profile, duration,
                   predictor=predictor,
                   prediction_latency=prediction_latency)
    queue = sorted(events or [], key=lambda e: e.t)
    qi = 0
    dt = cfg.sim.control_dt
    while True:
        t = loop.k * dt
        while qi < len(queue) and queue[qi].t <= t:
            _apply_event(loop, queue[qi])
            qi += 1
        alive = loop.tick()
        if on_tick is not None:
            on_tick(loop)
        if not alive:
            break
    res = loop.result
    if res.aborted_nonfinite:
        n = loop.k
        res = LoopResult(res.t[:max(n, 1)], res.master[:max(n, 1)],
                         res.slave[:max(n, 1)], res.env_frames, True,
                         res.model_ticks)
    m = dict(meta or {})
    m.setdefault("control_mode", mode.name)
    trial = record_trial(res, m, dt)
    return trial, res


def run_autonomous(cfg: Config, weights: ModelWeights, task_cfg: TaskConfig,
                   profile: OperatorProfile, duration: float, *,
                   trial_id: str, scenario: str, seed: int,
                   events: list[Event] | None = None,
                   prediction_latency: float | None = None
                   ) -> tuple[Trial, SuccessRecord]:
    """Model-driven run plus the success verdict."""
    variant = weights.variant
    predictor = LSTMPredictor(weights)
    trial, res = run_trial(
        cfg, variant.execution_mode, task_cfg, profile, duration,
        predictor=predictor, events=events,
        prediction_latency=prediction_latency,
        meta={"method": variant.value, "object": task_cfg.obj.name,
              "scenario": scenario, "seed": seed, "trial_id": trial_id})
    record = judge_success(res.env_frames, task_cfg, trial_id=trial_id,
                           method=variant.value, scenario=scenario, seed=seed,
                           aborted_nonfinite=res.aborted_nonfinite)
    return trial, record
