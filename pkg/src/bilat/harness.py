"""Campaign orchestration: identify, collect, train, evaluate, compare.

Everything below is deterministic given the config: trial seeds are fixed
functions of (scenario, object, trial index), never of the method, so the
three methods are always evaluated on pairwise-matched environments.

Directory layout under the working root::

    identified.yaml                 identify output
    trials/<control-mode>/*.txt     demonstration logs (80 per control type)
    datasets/<variant>/manifest.json
    models/<variant>.model + .history.json
    eval/<variant>/records.json     one SuccessRecord per evaluation trial
    report/                         delimited tables + figures
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .config import Config
from .controllers import ControlMode
from .dataset import (Manifest, NormStats, Trial, build_dataset, load_trial,
                      save_trial, split_trials)
from .executor import run_autonomous, run_trial
from .operator_model import OperatorProfile
from .seqmodel import ModelWeights, TrainConfig, train
from .sysid import ExcitationSchedule, excite_and_record, identify
from .task import FailureMode, ObjectSpec, SuccessRecord, TaskConfig
from .variants import MethodVariant

ALL_VARIANTS = (MethodVariant.SM_WO_FORCE, MethodVariant.SS_4CH,
                MethodVariant.SM_4CH)


@dataclass
class Paths:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    def trials_dir(self, mode: ControlMode) -> Path:
        return self.root / "trials" / mode.value

    def manifest_path(self, variant: MethodVariant) -> Path:
        return self.root / "datasets" / variant.slug / "manifest.json"

    def model_path(self, variant: MethodVariant) -> Path:
        return self.root / "models" / (variant.slug + ".model")

    def records_path(self, variant: MethodVariant) -> Path:
        return self.root / "eval" / variant.slug / "records.json"

    def report_dir(self) -> Path:
        return self.root / "report"


class MissingArtifact(RuntimeError):
    """Upstream output absent; message names the producing subcommand."""


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact("%s not found; run `bilat %s` first"
                              % (path, producer))
    return path


def _objects(cfg: Config, trained: bool | None = None) -> list[ObjectSpec]:
    out = []
    for name, d in cfg.section("objects").items():
        if trained is None or d["trained"] == trained:
            out.append(ObjectSpec.from_config(name, d))
    return out


def _task_cfg(cfg: Config, obj: ObjectSpec,
              overrides: dict | None = None) -> TaskConfig:
    return TaskConfig.from_config(cfg.section("task"), obj, overrides)


def _profile(cfg: Config, seed: int, task_cfg: TaskConfig,
             speed_scale: float | None = None,
             pushback: list | None = None) -> OperatorProfile:
    op_cfg = dict(cfg.section("operator"))
    if pushback is not None:
        op_cfg["pushback"] = pushback
    rng = np.random.default_rng(seed)
    return OperatorProfile.sample(op_cfg, rng, cfg.master_params,
                                  task_cfg.spoon_offset, task_cfg.arc_radius,
                                  speed_scale=speed_scale)


# -- identify ------------------------------------------------------------


def run_identify(cfg: Config, paths: Paths, seed: int = 7) -> dict:
    """30 s excitation on both plants; writes a loadable config fragment."""
    out = {"robots": {}}
    for name, params in (("master", cfg.master_params),
                         ("slave", cfg.slave_params)):
        log = excite_and_record(params, ExcitationSchedule(), seed)
        res = identify(log)
        frag = res.to_config_fragment()
        frag = {k: ([float(x) for x in v] if isinstance(v, list) else float(v))
                for k, v in frag.items()}
        out["robots"][name] = frag
        out.setdefault("diagnostics", {})[name] = {
            "condition_numbers": [float(c) for c in res.condition_numbers],
            "residual_rms": [float(r) for r in res.residual_rms],
            "events": log.events,
        }
    paths.root.mkdir(parents=True, exist_ok=True)
    (paths.root / "identified.yaml").write_text(
        yaml.safe_dump(out, sort_keys=True))
    return out


# -- collect -------------------------------------------------------------


def collection_seed(cfg: Config, obj_idx: int, trial_idx: int) -> int:
    return cfg.section("collection")["seed_base"] + obj_idx * 100 + trial_idx


def run_collect(cfg: Config, paths: Paths, mode: ControlMode,
                progress=None) -> list[Path]:
    """Demonstration campaign: trials_per_object x trained objects."""
    col = cfg.section("collection")
    per = col["trials_per_object"]
    speeds = col["speed_scales"]
    objs = _objects(cfg, trained=True)
    out_dir = paths.trials_dir(mode)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for oi, obj in enumerate(objs):
        tc = _task_cfg(cfg, obj)
        for ti in range(per):
            seed = collection_seed(cfg, oi, ti)
            prof = _profile(cfg, seed, tc,
                            speed_scale=speeds[ti % len(speeds)])
            trial, res = run_trial(
                cfg, mode, tc, prof, cfg.trial_length,
                meta={"object": obj.name, "seed": seed,
                      "trial_id": "%s-%s-%02d" % (mode.value, obj.name, ti)})
            if res.aborted_nonfinite:
                raise RuntimeError("collection trial went non-finite "
                                   "(object %s seed %d)" % (obj.name, seed))
            path = out_dir / ("%s_%02d.txt" % (obj.name, ti))
            save_trial(trial, path)
            files.append(path)
            if progress:
                progress("collect %s %s" % (mode.value, path.name))
    return files


# -- dataset + training ---------------------------------------------------


def run_build_dataset(cfg: Config, paths: Paths,
                      variant: MethodVariant) -> Manifest:
    mode = variant.collection_mode
    tdir = _require(paths.trials_dir(mode), "collect --control %s" % mode.value)
    files = sorted(str(p) for p in tdir.glob("*.txt"))
    if not files:
        raise MissingArtifact("no trials in %s; run `bilat collect`" % tdir)
    n_val = cfg.section("training")["val_trials"]
    train_files, val_files = split_trials(files, n_val,
                                          cfg.section("training")["seed"])
    trials = {f: load_trial(f) for f in files}
    _, stats = build_dataset([trials[f] for f in train_files], variant)
    man = Manifest(variant, train_files, val_files, stats)
    paths.manifest_path(variant).parent.mkdir(parents=True, exist_ok=True)
    man.save(paths.manifest_path(variant))
    return man


def run_train(cfg: Config, paths: Paths, variant: MethodVariant,
              epochs: int | None = None, log_every: int = 0) -> ModelWeights:
    man_path = _require(paths.manifest_path(variant),
                        "build-dataset --method '%s'" % variant.value)
    man = Manifest.load(man_path)
    tr = [load_trial(f) for f in man.train_files]
    va = [load_trial(f) for f in man.val_files]
    train_samples, _ = build_dataset(tr, variant, man.decimation, man.stats)
    val_samples, _ = build_dataset(va, variant, man.decimation, man.stats)

    t = cfg.section("training")
    tcfg = TrainConfig(lr=t["lr"], beta1=t["beta1"], beta2=t["beta2"],
                       eps=t["eps"], batch_size=t["batch_size"],
                       epochs=epochs or t["epochs"], seed=t["seed"],
                       clip_norm=t["clip_norm"], hidden=t["hidden"],
                       input_noise_std=t.get("input_noise_std", 0.0),
                       torque_noise_std=t.get("torque_noise_std"),
                       torque_bias_std=t.get("torque_bias_std", 0.0),
                       torque_scale_range=(
                           tuple(t["torque_scale_range"])
                           if t.get("torque_scale_range") else None))
    weights, history = train(train_samples, val_samples, variant, man.stats,
                             tcfg, log_every=log_every)
    mp = paths.model_path(variant)
    mp.parent.mkdir(parents=True, exist_ok=True)
    weights.save(mp)
    mp.with_suffix(".history.json").write_text(json.dumps(history))
    return weights


# -- evaluation ----------------------------------------------------------


def evaluation_cells(cfg: Config) -> list[dict]:
    """The fixed grid: trained, untrained, and the two scenario groups."""
    ev = cfg.section("evaluation")
    objs = cfg.section("objects")
    cells = []
    for name, d in objs.items():
        scen = "trained" if d["trained"] else "untrained"
        cells.append({"scenario": scen, "object": name, "overrides": {}})
    for scen, sd in ev["scenarios"].items():
        for name in sd["objects"]:
            cells.append({"scenario": scen, "object": name,
                          "overrides": dict(sd["overrides"])})
    return cells


def evaluation_seed(cfg: Config, cell_idx: int, trial_idx: int) -> int:
    return cfg.section("evaluation")["seed_base"] + cell_idx * 100 + trial_idx


def run_evaluate(cfg: Config, paths: Paths, variant: MethodVariant,
                 progress=None) -> list[SuccessRecord]:
    """60-trial grid plus the scripted push-back scenario for one method."""
    weights = ModelWeights.load(_require(
        paths.model_path(variant), "train --method '%s'" % variant.value))
    ev = cfg.section("evaluation")
    objs = cfg.section("objects")
    records: list[SuccessRecord] = []

    for ci, cell in enumerate(evaluation_cells(cfg)):
        obj = ObjectSpec.from_config(cell["object"], objs[cell["object"]])
        tc = _task_cfg(cfg, obj, cell["overrides"])
        for ti in range(ev["trials_per_cell"]):
            seed = evaluation_seed(cfg, ci, ti)
            speed = ev["speed_scales"][ti % len(ev["speed_scales"])]
            duration = max(cfg.trial_length, cfg.trial_length / speed) \
                + ev["duration_margin_s"]
            prof = _profile(cfg, seed, tc, speed_scale=speed)
            trial_id = "%s-%s-%02d" % (cell["scenario"], obj.name, ti)
            _, rec = run_autonomous(cfg, weights, tc, prof, duration,
                                    trial_id=trial_id,
                                    scenario=cell["scenario"], seed=seed)
            records.append(rec)
            if progress:
                progress("eval %s %s -> %s" % (variant.value, trial_id,
                                               rec.failure_mode.value))

    pb = ev["pushback"]
    obj = ObjectSpec.from_config(pb["object"], objs[pb["object"]])
    tc = _task_cfg(cfg, obj)
    for ti in range(pb["trials"]):
        seed = cfg.section("evaluation")["seed_base"] + 9000 + ti
        prof = _profile(cfg, seed, tc, pushback=pb["schedule"])
        duration = cfg.trial_length + ev["duration_margin_s"]
        trial_id = "pushback-%s-%02d" % (obj.name, ti)
        _, rec = run_autonomous(cfg, weights, tc, prof, duration,
                                trial_id=trial_id, scenario="pushback",
                                seed=seed)
        records.append(rec)
        if progress:
            progress("eval %s %s -> %s" % (variant.value, trial_id,
                                           rec.failure_mode.value))

    rp = paths.records_path(variant)
    rp.parent.mkdir(parents=True, exist_ok=True)
    save_records(records, rp)
    return records


def save_records(records: list[SuccessRecord], path: Path) -> None:
    doc = [{"trial_id": r.trial_id, "method": r.method,
            "object": r.object_name, "scenario": r.scenario, "seed": r.seed,
            "success": r.success, "failure_mode": r.failure_mode.value,
            "detail": r.detail} for r in records]
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_records(path: Path) -> list[SuccessRecord]:
    out = []
    for d in json.loads(Path(path).read_text()):
        out.append(SuccessRecord(
            d["trial_id"], d["method"], d["object"], d["scenario"], d["seed"],
            d["success"], FailureMode(d["failure_mode"]), d["detail"]))
    return out


# -- comparison ----------------------------------------------------------


def compare_methods(by_method: dict[str, list[SuccessRecord]],
                    speed_scales: list[float] | None = None) -> dict:
    """Totals, the scenario breakdown, and the four ordering verdicts.

    The push-back scenario is reported separately and excluded from the
    grid totals (it has no baseline analog in the main table).
    """
    methods = list(by_method)
    seeds = {m: sorted((r.scenario, r.object_name, r.seed)
                       for r in by_method[m]) for m in methods}
    first = seeds[methods[0]]
    for m in methods[1:]:
        if seeds[m] != first:
            raise ValueError("methods evaluated on mismatched seeds; "
                             "refusing to compare")

    def rate(recs):
        n = len(recs)
        k = sum(r.success for r in recs)
        return {"successes": k, "trials": n,
                "percent": 100.0 * k / n if n else 0.0}

    grid = {m: [r for r in by_method[m] if r.scenario != "pushback"]
            for m in methods}
    summary = {
        "totals": {m: rate(grid[m]) for m in methods},
        "pushback": {m: rate([r for r in by_method[m]
                              if r.scenario == "pushback"]) for m in methods},
        "scenarios": {},
    }
    scen_names = sorted({r.scenario for m in methods for r in grid[m]})
    for s in scen_names:
        summary["scenarios"][s] = {
            m: rate([r for r in grid[m] if r.scenario == s]) for m in methods}

    proposed = MethodVariant.SM_4CH.value
    baselines = [m for m in methods if m != proposed]
    verdicts = {}
    if proposed in by_method and baselines:
        tot = summary["totals"]
        verdicts["total_highest"] = all(
            tot[proposed]["successes"] >= tot[m]["successes"]
            for m in baselines)
        ph = summary["scenarios"].get("plate_height", {})
        verdicts["plate_height_strict"] = bool(ph) and all(
            ph[proposed]["percent"] > ph[m]["percent"] for m in baselines)
        wo = MethodVariant.SM_WO_FORCE.value
        ss = speed_scales or [1.0]
        off_speed = [
            r for r in grid.get(wo, [])
            if ss[int(r.trial_id.rsplit("-", 1)[1]) % len(ss)] != 1.0
            and r.failure_mode in (FailureMode.WRONG_DIRECTION,
                                   FailureMode.STALL)]
        verdicts["baseline_offspeed_failure"] = bool(off_speed)
        pbr = summary["pushback"].get(proposed, {"successes": 0, "trials": 0})
        verdicts["pushback_survives"] = (pbr["trials"] > 0
                                         and pbr["successes"] >= 4)
        verdicts["all"] = all(verdicts.values())
    summary["verdicts"] = verdicts
    return summary
