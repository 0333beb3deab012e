"""End-to-end acceptance gates.

Each test prints one PASS/FAIL line with the measured numbers.  The two
campaign-level gates (training quality, comparative outcome) run against a
full campaign directory; set ``BILAT_CAMPAIGN`` to reuse an existing one,
otherwise the fixture builds a fresh campaign (collection, datasets,
training, evaluation — roughly 45 minutes on one CPU).
"""

import os
from pathlib import Path

import numpy as np
import pytest

from bilat import harness
from bilat.config import default_config
from bilat.controllers import ControlMode
from bilat.dataset import build_dataset, load_trial, save_trial
from bilat.executor import Event, PlaybackPredictor, run_trial
from bilat.harness import ALL_VARIANTS, Manifest, Paths, compare_methods
from bilat.operator_model import OperatorProfile, joint_targets
from bilat.report import write_report
from bilat.seqmodel import (ModelWeights, TrainConfig, evaluate_mse,
                            gradient_check, train)
from bilat.sysid import ExcitationSchedule, excite_and_record, identify
from bilat.task import ObjectSpec, TaskConfig
from bilat.variants import MethodVariant

CFG = default_config()


def _task(obj="salad1", overrides=None):
    spec = ObjectSpec.from_config(obj, CFG.section("objects")[obj])
    return TaskConfig.from_config({**CFG.section("task"), **(overrides or {})},
                                  spec)


def _profile(seed, tc, **kw):
    return OperatorProfile.sample(CFG.section("operator"),
                                  np.random.default_rng(seed),
                                  CFG.master_params, tc.spoon_offset,
                                  tc.arc_radius, **kw)


def _line(name, ok, detail):
    print("ACCEPTANCE %-24s %s  (%s)" % (name, "PASS" if ok else "FAIL",
                                         detail))


@pytest.fixture(scope="module")
def campaign(tmp_path_factory):
    """(cfg, Paths) of a fully evaluated campaign."""
    env = os.environ.get("BILAT_CAMPAIGN")
    if env:
        paths = Paths(Path(env))
        if all(paths.records_path(v).exists() for v in ALL_VARIANTS):
            return CFG, paths
    paths = Paths(tmp_path_factory.mktemp("campaign"))
    for mode in (ControlMode.BILATERAL_4CH,
                 ControlMode.BILATERAL_POSITION_SYMMETRIC):
        harness.run_collect(CFG, paths, mode)
    for v in ALL_VARIANTS:
        harness.run_build_dataset(CFG, paths, v)
        harness.run_train(CFG, paths, v)
        harness.run_evaluate(CFG, paths, v)
    return CFG, paths


# -- 1. controller fidelity -------------------------------------------------


def test_controller_fidelity():
    from bilat.loops import SimLoop

    # free motion (no task environment): positions synchronized after the
    # startup transient
    tc = _task()
    loop = SimLoop(CFG, ControlMode.BILATERAL_4CH, tc, _profile(21, tc), 4.0,
                   with_environment=False)
    res = loop.run()
    # steady state: past the startup transient and while the operator is
    # not mid-stroke (tracking lag during fast strokes is not sync error)
    k0 = 1000
    quiet = np.all(np.abs(res.master[k0:, 3:6]) < 0.2, axis=1)
    sync = np.abs(res.master[k0:, 0:3] - res.slave[k0:, 0:3])[quiet]
    max_sync = float(sync.max())

    # wall press: command the master below the desk plane; the spoon tip
    # presses the stiff desk spring and the force channel must settle the
    # torque sum to ~0
    theta, omega = joint_targets(0.0, tc.desk_z - 0.01, 0.0, 0.0,
                                 CFG.master_params, tc.spoon_offset)
    events = [Event(0.05 * i, "master_target",
                    {"theta": theta.tolist(), "omega": omega.tolist()})
              for i in range(80)]
    press, _ = run_trial(CFG, ControlMode.BILATERAL_4CH, tc, _profile(22, tc),
                         4.0, events=events)
    tail = slice(3000, None)
    tau_sum = np.abs(press.master[tail, 6:9] + press.slave[tail, 6:9])
    max_tau = float(tau_sum.mean(axis=0).max())

    ok = max_sync < 0.01 and max_tau < 0.01
    _line("controller_fidelity", ok,
          "free sync %.4f rad, wall |tau_m+tau_s| %.4f N m"
          % (max_sync, max_tau))
    assert max_sync < 0.01
    assert max_tau < 0.01


# -- 2. observer oracles ------------------------------------------------


def test_observer_oracles():
    from bilat.dynamics import friction_torque, gravity_torque
    from bilat.loops import RobotSim

    params = CFG.slave_params
    cutoffs = CFG.section("observers")
    dt = CFG.sim.control_dt
    theta0 = np.array([0.1, -0.2, 0.3])

    def run(tau_ext, n=3000):
        sim = RobotSim.at_pose(theta0.copy(), params, params, cutoffs)
        last = None
        for _ in range(n):
            resp = sim.measure(dt)
            # hold-in-place controller with exact model feedforward
            hold = (-0.5 * (sim.state.theta - theta0) - 0.05 * resp.omega
                    + friction_torque(resp.omega, params)
                    + gravity_torque(sim.state.theta, params))
            sim.applied = hold
            for _ in range(CFG.sim.substeps):
                sim.substep(tau_ext, CFG.sim.physics_dt)
            last = resp
        return last

    free = run(np.zeros(3))
    free_err = float(np.abs(free.tau).max())

    inj = np.array([0.05, -0.04, 0.03])
    loaded = run(inj)
    rel = float(np.abs((loaded.tau - inj) / inj).max())

    ok = free_err < 0.005 and rel < 0.05
    _line("observer_oracles", ok,
          "free residual %.5f N m, injected recovery error %.2f%%"
          % (free_err, 100 * rel))
    assert free_err < 0.005
    assert rel < 0.05


# -- 3. identification ---------------------------------------------------


def test_identification():
    log = excite_and_record(CFG.slave_params, ExcitationSchedule(), seed=3,
                            sim=CFG.sim)
    got = identify(log).params_hat
    truth = CFG.slave_params
    j_err = float(np.abs((got.J - truth.J) / truth.J).max())
    g_err = float(np.abs((got.g_c - truth.g_c) / truth.g_c).max())
    d_err = abs((got.D - truth.D) / truth.D)
    ok = j_err < 0.02 and g_err < 0.02 and d_err < 0.05
    _line("identification", ok,
          "J err %.2f%%, g_c err %.2f%%, D err %.2f%%"
          % (100 * j_err, 100 * g_err, 100 * d_err))
    assert ok


# -- 4. learning correctness ---------------------------------------------


def test_learning_correctness(campaign):
    cfg, paths = campaign
    rng = np.random.default_rng(0)

    # analytic gradients vs finite differences
    g_err = gradient_check(in_dim=6, out_dim=6, hidden=8, T=12, rng=rng,
                           max_entries=400)

    # single-trial overfit
    variant = MethodVariant.SM_4CH
    man = Manifest.load(paths.manifest_path(variant))
    trial = load_trial(man.train_files[0])
    samples, stats = build_dataset([trial], variant)
    tcfg = TrainConfig(epochs=500, batch_size=1, seed=1,
                       hidden=cfg.section("training")["hidden"])
    weights, history = train(samples, samples, variant, stats, tcfg)
    overfit = history["train"][-1]

    # full training vs the predict-zero baseline on the validation split
    weights = ModelWeights.load(paths.model_path(variant))
    va = [load_trial(f) for f in man.val_files]
    val_samples, _ = build_dataset(va, variant, man.decimation, man.stats)
    model_mse = evaluate_mse(weights, val_samples)
    zero_mse = float(np.mean([np.mean(s.targets ** 2) for s in val_samples]))
    ratio = zero_mse / model_mse

    ok = g_err < 1e-5 and overfit < 1e-3 and ratio >= 10.0
    _line("learning_correctness", ok,
          "grad err %.2e, overfit MSE %.2e, baseline/model %.1fx"
          % (g_err, overfit, ratio))
    assert g_err < 1e-5
    assert overfit < 1e-3
    assert ratio >= 10.0


# -- 5. wiring equivalence -------------------------------------------------


def test_wiring_equivalence():
    tc = _task()
    demo, _ = run_trial(CFG, ControlMode.BILATERAL_4CH, tc, _profile(31, tc),
                        CFG.trial_length)
    replay, _ = run_trial(CFG, ControlMode.AUTONOMOUS_SM, tc, _profile(31, tc),
                          CFG.trial_length,
                          predictor=PlaybackPredictor(demo, source="master"))
    err = demo.slave[:, 0:3] - replay.slave[:, 0:3]
    rms = float(np.sqrt(np.mean(err ** 2, axis=0)).max())
    ok = rms < 0.02
    _line("wiring_equivalence", ok, "per-joint RMS %.4f rad" % rms)
    assert rms < 0.02


# -- 6. comparative outcome ----------------------------------------------


def test_comparative_outcome(campaign, tmp_path):
    cfg, paths = campaign
    by_method = {v.value: harness.load_records(paths.records_path(v))
                 for v in ALL_VARIANTS}
    summary = write_report(by_method, tmp_path,
                           cfg.section("evaluation")["speed_scales"])
    v = summary["verdicts"]
    totals = {m: summary["totals"][m]["percent"] for m in by_method}
    ok = v["all"]
    _line("comparative_outcome", ok,
          "totals %s, verdicts %s"
          % ({m: "%.1f%%" % p for m, p in totals.items()},
             {k: w for k, w in v.items() if k != "all"}))
    assert v["total_highest"], "proposed method total must be highest"
    assert v["plate_height_strict"], "plate-height must strictly separate"
    assert v["baseline_offspeed_failure"], \
        "baseline must fail off-speed by direction/stall"
    assert v["pushback_survives"], "proposed must survive push-back >= 4/5"


# -- 7. determinism ---------------------------------------------------------


def test_determinism(tmp_path):
    tc = _task()

    def once(name):
        trial, _ = run_trial(
            CFG, ControlMode.BILATERAL_4CH, tc, _profile(55, tc), 2.0,
            events=[Event(0.7, "perturb", {"fs": 0.2, "fz": 0.0,
                                           "duration": 0.2})],
            meta={"trial_id": "det"})
        p = tmp_path / name
        save_trial(trial, p)
        return p.read_bytes()

    a, b = once("a.txt"), once("b.txt")
    ok = a == b
    _line("determinism", ok, "%d-byte logs %s" % (len(a),
          "identical" if ok else "differ"))
    assert ok
