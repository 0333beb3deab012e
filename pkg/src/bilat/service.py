"""Interactive WebSocket bridge to the simulator.

One operator session at a time.  JSON text frames over a WebSocket at
``/sim``; every message carries a ``type`` field:

    client -> server
      hello          {version}
      mode_switch    {mode: collect|autonomous|idle, object?, method?, seed?}
      master_target  {seq, yaw, z, vyaw?, vz?}        (drag teleoperation)
      perturb        {seq, fs, fz, duration?}         (push-back tool)
      export         {}                               (request transcript)

    server -> client
      hello          {version, objects, methods}
      ack            {what, trial_id?, geometry?}
      snapshot       {t, k, mode, phase, master, slave, object}  at 50 Hz
      trial_done     {trial_id, success, failure_mode, detail}
      transcript     {meta, events}
      error          {message}

Inputs are applied only at control-tick boundaries and logged with their
simulation time, so an exported transcript replays headlessly to a
bit-identical trial (see ``replay_transcript``).
"""

from __future__ import annotations

import asyncio
import json
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import Config
from .controllers import ControlMode
from .dataset import Trial, save_trial
from .executor import (Event, LSTMPredictor, run_trial, save_events)
from .harness import Paths, _profile, _task_cfg
from .operator_model import joint_targets
from .seqmodel import ModelWeights
from .task import ObjectSpec, judge_success
from .variants import MethodVariant

PROTOCOL_VERSION = 1
SNAPSHOT_EVERY = 20               # control ticks -> 50 Hz


def _joint_dict(row: np.ndarray) -> dict:
    return {"theta": row[0:3].tolist(), "omega": row[3:6].tolist(),
            "tau": row[6:9].tolist()}


class SessionRunner:
    """Owns the sim loop for one live trial and its event log."""

    def __init__(self, cfg: Config, paths: Paths, mode: str, object_name: str,
                 method: str | None, seed: int, realtime: bool = True):
        self.cfg = cfg
        self.mode = mode            # flips to "idle" when the trial ends
        self.session_mode = mode    # what the transcript records
        self.seed = seed
        self.realtime = realtime
        obj_cfg = cfg.section("objects")[object_name]
        self.obj = ObjectSpec.from_config(object_name, obj_cfg)
        self.task_cfg = _task_cfg(cfg, self.obj)
        self.profile = _profile(cfg, seed, self.task_cfg)
        self.events: list[Event] = []
        self.trial_id = "live-%s-%s-%d" % (mode, object_name, seed)

        from .loops import SimLoop  # imported late: keeps module import light
        if mode == "collect":
            self.control_mode = ControlMode.BILATERAL_4CH
            predictor = None
            self.method = None
        else:
            self.method = MethodVariant.parse(method)
            weights = ModelWeights.load(paths.model_path(self.method))
            predictor = LSTMPredictor(weights)
            self.control_mode = self.method.execution_mode
        self.loop = SimLoop(cfg, self.control_mode, self.task_cfg,
                            self.profile, cfg.trial_length,
                            predictor=predictor)

    @property
    def t(self) -> float:
        return self.loop.k * self.cfg.sim.control_dt

    def apply(self, msg: dict) -> None:
        """Record and apply one input message at the next tick boundary."""
        t = self.t
        if msg["type"] == "master_target":
            theta, omega = joint_targets(
                float(msg["yaw"]), float(msg["z"]),
                float(msg.get("vyaw", 0.0)), float(msg.get("vz", 0.0)),
                self.cfg.master_params, self.task_cfg.spoon_offset)
            ev = Event(t, "master_target",
                       {"theta": theta.tolist(), "omega": omega.tolist()})
        elif msg["type"] == "perturb":
            ev = Event(t, "perturb",
                       {"fs": float(msg["fs"]), "fz": float(msg["fz"]),
                        "duration": float(msg.get("duration", 0.1))})
        else:
            raise ValueError("unknown input type %r" % msg["type"])
        self.events.append(ev)
        from .executor import _apply_event
        _apply_event(self.loop, ev)

    def snapshot(self) -> dict:
        loop = self.loop
        k = max(loop.k - 1, 0)
        env = loop.env
        phase = self.profile.phase(self.t)
        return {
            "type": "snapshot", "t": round(self.t, 6), "k": loop.k,
            "mode": self.mode, "phase": phase,
            "master": _joint_dict(loop.result.master[k]),
            "slave": _joint_dict(loop.result.slave[k]),
            "object": {"s": env.s, "z": env.z, "engaged": env.engaged,
                       "plate_a_s": self.task_cfg.plate_a_s,
                       "plate_b_s": self.task_cfg.plate_b_s},
        }

    def finish(self) -> dict:
        from .dataset import record_trial
        res = self.loop.result
        trial = record_trial(res, {
            "object": self.obj.name, "seed": self.seed, "mode": self.mode,
            "method": self.method.value if self.method else "",
            "trial_id": self.trial_id,
            "control_mode": self.control_mode.name}, self.cfg.sim.control_dt)
        record = judge_success(
            res.env_frames, self.task_cfg, trial_id=self.trial_id,
            method=self.method.value if self.method else "demo",
            scenario="live", seed=self.seed,
            aborted_nonfinite=res.aborted_nonfinite)
        return {"trial": trial, "record": record}

    def geometry(self) -> dict:
        """Scene constants the client needs to draw (it runs no physics)."""
        tc = self.task_cfg
        l1, l2 = self.cfg.slave_params.link_lengths
        return {"l1": l1, "l2": l2, "spoon_offset": tc.spoon_offset,
                "arc_radius": tc.arc_radius, "surface_z": tc.surface_z,
                "desk_z": tc.desk_z, "plate_a_s": tc.plate_a_s,
                "plate_b_s": tc.plate_b_s, "plate_radius": tc.plate_radius,
                "object_size": tc.obj.size,
                "trial_length_s": self.cfg.trial_length}

    def transcript(self) -> dict:
        return {
            "meta": {"mode": self.session_mode, "object": self.obj.name,
                     "method": self.method.value if self.method else None,
                     "seed": self.seed, "trial_id": self.trial_id,
                     "protocol_version": PROTOCOL_VERSION},
            "events": [e.to_dict() for e in self.events],
        }


def replay_transcript(cfg: Config, paths: Paths,
                      transcript: dict) -> tuple[Trial, dict]:
    """Headless re-run of an exported session; bit-identical by design."""
    meta = transcript["meta"]
    runner = SessionRunner(cfg, paths, meta["mode"], meta["object"],
                           meta.get("method"), meta["seed"], realtime=False)
    events = [Event.from_dict(d) for d in transcript["events"]]
    trial, res = run_trial(
        cfg, runner.control_mode, runner.task_cfg, runner.profile,
        cfg.trial_length,
        predictor=runner.loop.predictor, events=events,
        meta={"object": meta["object"], "seed": meta["seed"],
              "mode": meta["mode"], "method": meta.get("method") or "",
              "trial_id": meta["trial_id"],
              "control_mode": runner.control_mode.name})
    record = judge_success(
        res.env_frames, runner.task_cfg, trial_id=meta["trial_id"],
        method=meta.get("method") or "demo", scenario="live",
        seed=meta["seed"], aborted_nonfinite=res.aborted_nonfinite)
    return trial, {"record": record}


def create_app(cfg: Config, workdir: str | Path, realtime: bool = True,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI()
    paths = Paths(Path(workdir))
    sessions_dir = Path(workdir) / "sessions"

    @app.websocket("/sim")
    async def sim(ws: WebSocket):
        await ws.accept()
        runner: SessionRunner | None = None
        inbox: asyncio.Queue = asyncio.Queue()
        closed = False

        async def reader():
            nonlocal closed
            try:
                while True:
                    await inbox.put(json.loads(await ws.receive_text()))
            except (WebSocketDisconnect, RuntimeError):
                closed = True

        async def _handle(msg: dict):
            nonlocal runner
            try:
                mtype = msg.get("type")
                if mtype == "hello":
                    return {"type": "hello", "version": PROTOCOL_VERSION,
                            "objects": list(cfg.section("objects")),
                            "methods": [v.value for v in MethodVariant]}
                if mtype == "mode_switch":
                    mode = msg["mode"]
                    if mode == "idle":
                        if runner is not None:
                            runner.mode = "idle"
                        return {"type": "ack", "what": "mode_switch"}
                    runner = SessionRunner(
                        cfg, paths, mode, msg.get("object", "salad1"),
                        msg.get("method"), int(msg.get("seed", 0)),
                        realtime=realtime)
                    return {"type": "ack", "what": "mode_switch",
                            "trial_id": runner.trial_id,
                            "geometry": runner.geometry()}
                if mtype in ("master_target", "perturb"):
                    if runner is None or runner.mode == "idle":
                        return {"type": "error",
                                "message": "no active trial"}
                    runner.apply(msg)
                    return None
                if mtype == "export":
                    if runner is None:
                        return {"type": "error", "message": "no session"}
                    return {"type": "transcript", **runner.transcript()}
                return {"type": "error",
                        "message": "unknown message type %r" % mtype}
            except (KeyError, ValueError, TypeError) as exc:
                return {"type": "error", "message": str(exc)}

        rtask = asyncio.create_task(reader())
        try:
            while not closed:
                # drain inputs; they take effect at the next tick boundary
                while not inbox.empty():
                    msg = inbox.get_nowait()
                    reply = await _handle(msg)
                    if reply is not None:
                        await ws.send_text(json.dumps(reply))
                if runner is not None and runner.mode != "idle":
                    done = False
                    for _ in range(SNAPSHOT_EVERY):
                        if not runner.loop.tick():
                            done = True
                            break
                    await ws.send_text(json.dumps(runner.snapshot()))
                    if done:
                        out = runner.finish()
                        await _save_session(runner, out)
                        rec = out["record"]
                        await ws.send_text(json.dumps({
                            "type": "trial_done",
                            "trial_id": rec.trial_id,
                            "success": rec.success,
                            "failure_mode": rec.failure_mode.value,
                            "detail": rec.detail}))
                        runner.mode = "idle"
                    if realtime:
                        await asyncio.sleep(SNAPSHOT_EVERY
                                            * cfg.sim.control_dt)
                    else:
                        await asyncio.sleep(0)
                else:
                    await asyncio.sleep(0.02)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            rtask.cancel()

    async def _save_session(runner: SessionRunner, out: dict) -> None:
        sessions_dir.mkdir(parents=True, exist_ok=True)
        base = sessions_dir / runner.trial_id
        save_trial(out["trial"], base.with_suffix(".txt"))
        save_events(runner.events, base.with_suffix(".events"))
        (base.with_suffix(".transcript.json")).write_text(
            json.dumps(runner.transcript(), indent=2, sort_keys=True))

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app
