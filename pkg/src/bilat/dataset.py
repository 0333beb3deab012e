"""Trial recording, file formats, decimation and normalization.

A trial is a 1 kHz log of both robots' response values (angle, velocity,
torque -- 9 channels per robot, 18 total).  For learning it is decimated to
the 20 ms model cycle with no pre-filtering: at execution time the model
sees raw samples of the live state every 20 ms, so training inputs must
look exactly the same.

File formats are plain text and bit-exact on round trip:

    trial file     '#'-prefixed metadata lines, a header row, then one
                   whitespace-separated row per millisecond with >= 9
                   significant digits (written with %.12g)
    manifest       JSON: trial file list, split assignment, NormStats,
                   variant name
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import JointState
from .variants import MethodVariant

CHANNELS = tuple(
    "%s_%s%d" % (robot, q, j + 1)
    for robot in ("master", "slave")
    for q in ("theta", "omega", "tau")
    for j in range(3)
)
_HEADER = "t " + " ".join(CHANNELS)


@dataclass
class Frame:
    t: float
    master: JointState
    slave: JointState


@dataclass
class Trial:
    """One recorded demonstration: 18 channels at 1 kHz plus metadata."""

    t: np.ndarray                 # (n,)
    data: np.ndarray              # (n, 18) in CHANNELS order
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t.shape[0] != self.data.shape[0] or self.data.shape[1] != 18:
            raise ValueError("trial shape mismatch: %s vs %s"
                             % (self.t.shape, self.data.shape))
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("trial contains non-finite samples")

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def master(self) -> np.ndarray:
        return self.data[:, :9]

    @property
    def slave(self) -> np.ndarray:
        return self.data[:, 9:]


def record_trial(result, meta: dict | None = None,
                 control_dt: float = 1e-3) -> Trial:
    """Package a loop result (master/slave (n, 9) arrays) into a Trial."""
    n = result.master.shape[0]
    t = np.arange(n) * control_dt
    data = np.hstack([result.master, result.slave])
    return Trial(t, data, dict(meta or {}))


def save_trial(trial: Trial, path: str | Path) -> None:
    path = Path(path)
    lines = ["# %s = %s" % (k, trial.meta[k]) for k in sorted(trial.meta)]
    lines.append(_HEADER)
    for i in range(len(trial)):
        row = [trial.t[i], *trial.data[i]]
        lines.append(" ".join("%.12g" % v for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_trial(path: str | Path) -> Trial:
    meta: dict = {}
    rows = []
    header = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = _parse_meta(v.strip())
        elif header is None:
            header = line.split()
            if header != _HEADER.split():
                raise ValueError("unexpected trial header in %s" % path)
        else:
            rows.append([float(x) for x in line.split()])
    arr = np.asarray(rows)
    return Trial(arr[:, 0], arr[:, 1:], meta)


def _parse_meta(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


@dataclass
class NormStats:
    """Per-channel z-score statistics (training split only)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if np.any(self.std <= 0):
            raise ValueError("std must be positive (epsilon-floor upstream)")

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]))


@dataclass
class SequenceSample:
    """Normalized (input, target) sequence pair, one model step apart."""

    inputs: np.ndarray            # (steps, dims) slave channels at 20 ms
    targets: np.ndarray           # (steps, dims) one step ahead

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("input/target length mismatch")


def _channel_slice(variant: MethodVariant, robot: str) -> np.ndarray:
    """Column indices into the 18-channel layout for one robot's model dims."""
    base = 0 if robot == "master" else 9
    idx = list(range(base, base + 6)) if not variant.uses_force \
        else list(range(base, base + 9))
    return np.asarray(idx)


def decimate(trial: Trial, every: int = 20) -> np.ndarray:
    """Every ``every``-th raw frame, starting at t = 0.  No filtering."""
    return trial.data[::every]


def build_dataset(trials: list[Trial], variant: MethodVariant,
                  every: int = 20, stats: NormStats | None = None,
                  eps: float = 1e-8) -> tuple[list[SequenceSample], NormStats]:
    """Decimate, normalize and pair inputs with one-step-ahead targets.

    ``stats`` given: apply them (validation/eval path).  ``stats`` omitted:
    compute over these trials, i.e. the caller passes the training split
    only.  Inputs are slave channels; targets are master channels for SM
    variants and slave channels for the SS variant.
    """
    if not trials:
        raise ValueError("no trials")
    required = variant.collection_mode.name
    for tr in trials:
        got = tr.meta.get("control_mode", required)
        if got != required:
            raise ValueError("trial collected under %s, %s requires %s"
                             % (got, variant.value, required))

    in_cols = _channel_slice(variant, "slave")
    out_cols = _channel_slice(variant,
                              "master" if variant.targets_master else "slave")

    dec = [decimate(tr, every) for tr in trials]
    if stats is None:
        stacked = np.vstack(dec)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        flat = std < eps
        if np.any(flat):
            warnings.warn("zero-variance channels %s; std floored"
                          % np.nonzero(flat)[0].tolist())
            std = np.where(flat, eps, std)
        stats = NormStats(mean, std)

    samples = []
    for d in dec:
        z = stats.normalize(d)
        samples.append(SequenceSample(z[:-1, in_cols], z[1:, out_cols]))
    return samples, stats


@dataclass
class Manifest:
    """Dataset description written next to the trial files."""

    variant: MethodVariant
    train_files: list[str]
    val_files: list[str]
    stats: NormStats
    decimation: int = 20

    def save(self, path: str | Path) -> None:
        doc = {
            "variant": self.variant.value,
            "train_files": self.train_files,
            "val_files": self.val_files,
            "norm_stats": self.stats.to_dict(),
            "decimation": self.decimation,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        doc = json.loads(Path(path).read_text())
        return cls(MethodVariant.parse(doc["variant"]), doc["train_files"],
                   doc["val_files"], NormStats.from_dict(doc["norm_stats"]),
                   doc["decimation"])


def split_trials(files: list[str], n_val: int, seed: int) -> tuple[list[str], list[str]]:
    """Whole-trial split, deterministic in the seed."""
    order = np.random.default_rng(seed).permutation(len(files))
    val = sorted(files[i] for i in order[:n_val])
    train = sorted(files[i] for i in order[n_val:])
    return train, val
