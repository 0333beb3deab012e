"""Command-line entry point.

    bilat identify        --workdir W [--seed N]
    bilat collect         --workdir W [--control 4ch|position-symmetric|both]
    bilat build-dataset   --workdir W [--method M|all]
    bilat train           --workdir W [--method M|all] [--epochs N]
    bilat evaluate        --workdir W [--method M|all]
    bilat report          --workdir W
    bilat serve           --workdir W [--port P] [--no-realtime] [--ui DIR]
    bilat replay          --workdir W --transcript F [--out F] [--check F]

Exit codes: 0 success, 1 evaluation verdict failed, 2 operational error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .config import load_config
from .controllers import ControlMode
from .harness import MissingArtifact, Paths
from .variants import MethodVariant


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workdir", required=True, help="campaign directory")
    p.add_argument("--config", help="YAML config overriding the defaults")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                   help="dotted config override, e.g. training.epochs=200")


def _parse_overrides(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs:
        key, _, val = pair.partition("=")
        try:
            val = json.loads(val)
        except json.JSONDecodeError:
            pass
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    return out


def _methods(arg: str) -> list[MethodVariant]:
    if arg == "all":
        return list(harness.ALL_VARIANTS)
    return [MethodVariant.parse(arg)]


def _progress(msg: str) -> None:
    print(msg, flush=True)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="bilat",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("identify", help="identify robot parameters")
    _add_common(p)
    p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("collect", help="record demonstration trials")
    _add_common(p)
    p.add_argument("--control", default="both",
                   choices=["4ch", "position-symmetric", "both"])

    for name in ("build-dataset", "train", "evaluate"):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--method", default="all",
                       help="method name or 'all'")
        if name == "train":
            p.add_argument("--epochs", type=int, default=None)
            p.add_argument("--log-every", type=int, default=0)

    p = sub.add_parser("report", help="render tables and figures")
    _add_common(p)

    p = sub.add_parser("serve", help="interactive teleoperation service")
    _add_common(p)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--no-realtime", action="store_true",
                   help="run the sim as fast as possible")
    p.add_argument("--ui", default=None, metavar="DIR",
                   help="serve a static cockpit UI from this directory")

    p = sub.add_parser("replay", help="re-run a session transcript headlessly")
    _add_common(p)
    p.add_argument("--transcript", required=True)
    p.add_argument("--out", help="write the replayed trial here")
    p.add_argument("--check", help="trial file that must match bit-exactly")

    args = ap.parse_args(argv)
    cfg = load_config(args.config, _parse_overrides(args.set))
    paths = Paths(Path(args.workdir))

    try:
        return _dispatch(args, cfg, paths)
    except MissingArtifact as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


def _dispatch(args, cfg, paths: Paths) -> int:
    if args.cmd == "identify":
        out = harness.run_identify(cfg, paths, args.seed)
        print(json.dumps(out["robots"], indent=2, sort_keys=True))
        return 0

    if args.cmd == "collect":
        modes = {"4ch": [ControlMode.BILATERAL_4CH],
                 "position-symmetric":
                     [ControlMode.BILATERAL_POSITION_SYMMETRIC],
                 "both": [ControlMode.BILATERAL_4CH,
                          ControlMode.BILATERAL_POSITION_SYMMETRIC]}
        for mode in modes[args.control]:
            files = harness.run_collect(cfg, paths, mode, _progress)
            print("wrote %d trials under %s"
                  % (len(files), paths.trials_dir(mode)))
        return 0

    if args.cmd == "build-dataset":
        for v in _methods(args.method):
            man = harness.run_build_dataset(cfg, paths, v)
            print("%s: %d train / %d val trials"
                  % (v.value, len(man.train_files), len(man.val_files)))
        return 0

    if args.cmd == "train":
        for v in _methods(args.method):
            harness.run_train(cfg, paths, v, epochs=args.epochs,
                              log_every=args.log_every)
            print("trained %s -> %s" % (v.value, paths.model_path(v)))
        return 0

    if args.cmd == "evaluate":
        for v in _methods(args.method):
            recs = harness.run_evaluate(cfg, paths, v, _progress)
            ok = sum(r.success for r in recs)
            print("%s: %d/%d successes" % (v.value, ok, len(recs)))
        return 0

    if args.cmd == "report":
        from .report import write_report
        by_method = {}
        for v in harness.ALL_VARIANTS:
            rp = paths.records_path(v)
            if rp.exists():
                by_method[v.value] = harness.load_records(rp)
        summary = write_report(
            by_method, paths.report_dir(),
            cfg.section("evaluation")["speed_scales"])
        print("report written to %s" % paths.report_dir())
        if not by_method:
            return 0
        for name, cell in summary["totals"].items():
            print("  %-14s %5.1f%% (%d/%d)" % (name, cell["percent"],
                                               cell["successes"],
                                               cell["trials"]))
        verdicts = summary["verdicts"]
        if verdicts:
            for k, v in verdicts.items():
                print("  verdict %-26s %s" % (k, "pass" if v else "FAIL"))
            return 0 if verdicts["all"] else 1
        return 0

    if args.cmd == "serve":
        import uvicorn
        from .service import create_app
        app = create_app(cfg, paths.root, realtime=not args.no_realtime,
                         static_dir=args.ui)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    if args.cmd == "replay":
        from .dataset import save_trial
        from .service import replay_transcript
        transcript = json.loads(Path(args.transcript).read_text())
        trial, out = replay_transcript(cfg, paths, transcript)
        if args.out:
            save_trial(trial, args.out)
        if args.check:
            got = Path(args.out).read_bytes() if args.out else None
            if got is None:
                import tempfile
                with tempfile.NamedTemporaryFile(suffix=".txt") as fh:
                    save_trial(trial, fh.name)
                    got = Path(fh.name).read_bytes()
            want = Path(args.check).read_bytes()
            if got != want:
                print("replay mismatch against %s" % args.check,
                      file=sys.stderr)
                return 1
            print("replay matches %s bit-exactly" % args.check)
        rec = out["record"]
        print("replayed %s: %s" % (rec.trial_id,
                                   "success" if rec.success
                                   else rec.failure_mode.value))
        return 0

    raise AssertionError("unhandled command %s" % args.cmd)


if __name__ == "__main__":
    sys.exit(main())
