"""Report rendering: success-rate tables as CSV plus matplotlib figures.

Every number here is a pure fold over the stored SuccessRecords; nothing is
recomputed from simulation state.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import compare_methods
from .task import SuccessRecord

_SCENARIO_ORDER = ("trained", "untrained", "spoon_length", "plate_height",
                   "pushback")


def _fmt(cell: dict) -> str:
    return "%.1f (%d/%d)" % (cell["percent"], cell["successes"],
                             cell["trials"])


def _cells(records: list[SuccessRecord]):
    """(scenario, object) -> records, ordered like the summary table."""
    keys = []
    cells: dict[tuple[str, str], list[SuccessRecord]] = {}
    for r in records:
        k = (r.scenario, r.object_name)
        if k not in cells:
            cells[k] = []
            keys.append(k)
        cells[k].append(r)
    keys.sort(key=lambda k: (_SCENARIO_ORDER.index(k[0])
                             if k[0] in _SCENARIO_ORDER else 99, k[1]))
    return keys, cells


def write_report(by_method: dict[str, list[SuccessRecord]], out_dir: Path,
                 speed_scales: list[float] | None = None) -> dict:
    """Emit report.csv, summary.json and the figures; returns the summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = list(by_method)
    summary = compare_methods(by_method, speed_scales) if by_method else \
        {"totals": {}, "scenarios": {}, "pushback": {}, "verdicts": {}}

    all_records = [r for recs in by_method.values() for r in recs]
    keys, cells = _cells(all_records)
    with open(out_dir / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "object"] + methods)
        for scen, obj in keys:
            row = [scen, obj]
            for m in methods:
                recs = [r for r in cells[(scen, obj)] if r.method == m]
                k = sum(r.success for r in recs)
                row.append("%.1f (%d/%d)" % (100.0 * k / len(recs), k,
                                             len(recs)) if recs else "-")
            w.writerow(row)
        if summary["totals"]:
            w.writerow(["total", ""]
                       + [_fmt(summary["totals"][m]) for m in methods])

    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if summary["totals"]:
        _figure_totals(summary, methods, out_dir / "success_rates.png")
        _figure_failures(by_method, out_dir / "failure_modes.png")
    return summary


def _figure_totals(summary: dict, methods: list[str], path: Path) -> None:
    scen = [s for s in _SCENARIO_ORDER[:-1] if s in summary["scenarios"]]
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(len(methods), 1)
    for i, m in enumerate(methods):
        xs = [j + i * width for j in range(len(scen) + 1)]
        ys = [summary["scenarios"][s][m]["percent"] for s in scen]
        ys.append(summary["totals"][m]["percent"])
        ax.bar(xs, ys, width=width, label=m)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(scen) + 1)])
    ax.set_xticklabels(scen + ["total"], rotation=20)
    ax.set_ylabel("success rate [%]")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _figure_failures(by_method: dict[str, list[SuccessRecord]],
                     path: Path) -> None:
    methods = list(by_method)
    modes = sorted({r.failure_mode.value for recs in by_method.values()
                    for r in recs if not r.success})
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(len(methods), 1)
    for i, m in enumerate(methods):
        counts = [sum(r.failure_mode.value == fm for r in by_method[m])
                  for fm in modes]
        ax.bar([j + i * width for j in range(len(modes))], counts,
               width=width, label=m)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(modes))])
    ax.set_xticklabels(modes, rotation=20)
    ax.set_ylabel("failure count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_trial_figure(t, master, slave, path: Path, title: str = "") -> None:
    """18-channel strip chart of one trial (three rows x two robots)."""
    fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    names = ("position [rad]", "velocity [rad/s]", "torque [N m]")
    for row, name in enumerate(names):
        ax = axes[row]
        for j in range(3):
            ax.plot(t, master[:, 3 * row + j], lw=0.8,
                    label="master j%d" % (j + 1))
            ax.plot(t, slave[:, 3 * row + j], lw=0.8, ls="--",
                    label="slave j%d" % (j + 1))
        ax.set_ylabel(name)
        if row == 0:
            ax.legend(fontsize=6, ncol=3)
    axes[-1].set_xlabel("time [s]")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
