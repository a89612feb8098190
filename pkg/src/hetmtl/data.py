"""Synthetic correlated multi-attribute data, CSV I/O and train/test splitting.

Every task's label is a function of the same Gaussian latent vector, so the
attributes are statistically dependent, which is what a shared trunk exploits.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError
from .losses import TaskSpec

TASK_PREFIX = "task:"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: tuple
    tasks: tuple
    name: str = "dataset"

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError("features must be an N x D matrix")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if len(self.labels) != len(self.tasks):
            raise ValueError(f"{len(self.labels)} label columns for {len(self.tasks)} tasks")
        cols = []
        for task, y in zip(self.tasks, self.labels):
            y = task.check_labels(y)
            if len(y) != len(feats):
                raise ValueError(f"task {task.name!r}: {len(y)} labels for {len(feats)} rows")
            cols.append(y)
        object.__setattr__(self, "labels", tuple(cols))

    def __len__(self):
        return len(self.features)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, name=None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], tuple(y[idx] for y in self.labels), self.tasks, name or self.name)

    def select_tasks(self, names: Sequence[str]) -> "Dataset":
        pos = {t.name: i for i, t in enumerate(self.tasks)}
        missing = [n for n in names if n not in pos]
        if missing:
            raise KeyError(f"unknown tasks {missing}")
        keep = [pos[n] for n in names]
        return Dataset(
            self.features,
            tuple(self.labels[i] for i in keep),
            tuple(self.tasks[i] for i in keep),
            self.name,
        )


@dataclass(frozen=True)
class GenConfig:
    n: int = 2000
    latent_dim: int = 4
    feature_dim: int = 16
    tasks: tuple = (TaskSpec.ordinal("age", 8), TaskSpec.nominal("group", 4))
    label_noise: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        noise = self.label_noise
        noise = (0.0,) * len(self.tasks) if noise is None else tuple(float(v) for v in noise)
        object.__setattr__(self, "label_noise", noise)
        if self.n < 1 or self.latent_dim < 1 or self.feature_dim < 1:
            raise ValueError("n, latent_dim and feature_dim must be positive")
        if not self.tasks:
            raise ValueError("at least one task is required")
        if len(noise) != len(self.tasks):
            raise ValueError(f"{len(noise)} noise levels for {len(self.tasks)} tasks")
        for task, p in zip(self.tasks, noise):
            if not 0.0 <= p < 0.5:
                raise ValueError(f"task {task.name!r}: label_noise must lie in [0, 0.5), got {p}")


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence([seed, *tags]))


def clean_labels(task: TaskSpec, z: np.ndarray, rng) -> np.ndarray:
    """Noise-free labels of one task from latent rows ``z``."""
    latent_dim = z.shape[1]
    if task.is_ordinal:
        w = rng.standard_normal(latent_dim)
        score = z @ (w / np.linalg.norm(w))  # ~ N(0, 1)
        nd = NormalDist()
        edges = np.array([nd.inv_cdf(k / task.size) for k in range(1, task.size)])
        return 1 + np.searchsorted(edges, score, side="right")
    proj = rng.standard_normal((latent_dim, task.size))
    return np.argmax(z @ proj, axis=1)


def corrupt_labels(task: TaskSpec, y: np.ndarray, p: float, rng) -> np.ndarray:
    """Replace each label with probability ``p``.

    Nominal labels move to a uniformly chosen *other* class. Ordinal labels
    move one rank up or down; a step that would leave ``[1, K]`` is reflected
    to the opposite neighbour, so a corrupted label always differs from the
    clean one and never leaves the valid range.
    """
    flip = rng.random(len(y)) < p
    if task.is_ordinal:
        step = np.where(rng.random(len(y)) < 0.5, -1, 1)
        moved = y + step
        moved = np.where(moved < 1, y + 1, moved)
        moved = np.where(moved > task.size, y - 1, moved)
    else:
        offset = rng.integers(1, task.size, size=len(y))
        moved = (y + offset) % task.size
    return np.where(flip, moved, y).astype(np.int64)


def generate(cfg: GenConfig, name: str = "synthetic") -> Dataset:
    """Draw a dataset. Independent random streams feed the latent/features,
    each task's label map and each task's noise, so changing one task's noise
    level leaves everything else untouched."""
    rng = _rng(cfg.seed, 1)
    z = rng.standard_normal((cfg.n, cfg.latent_dim))
    mix = rng.standard_normal((cfg.latent_dim, cfg.feature_dim))
    features = np.tanh(z @ mix) + 0.1 * rng.standard_normal((cfg.n, cfg.feature_dim))

    labels = []
    for t, (task, p) in enumerate(zip(cfg.tasks, cfg.label_noise)):
        y = clean_labels(task, z, _rng(cfg.seed, 2, t))
        if p > 0:
            y = corrupt_labels(task, y, p, _rng(cfg.seed, 3, t))
        labels.append(y)
    return Dataset(features, tuple(labels), cfg.tasks, name)


def header(ds: Dataset) -> list:
    return [f"feat_{j}" for j in range(ds.feature_dim)] + [TASK_PREFIX + t.name for t in ds.tasks]


def to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    buf.write(",".join(header(ds)) + "\n")
    for i in range(len(ds)):
        row = [f"{v:.9g}" for v in ds.features[i]]
        row += [str(int(y[i])) for y in ds.labels]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def save(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_csv(ds))


def load(path, task_specs: Sequence[TaskSpec], name: Optional[str] = None) -> Dataset:
    """Read a dataset CSV whose task columns must match ``task_specs`` in order."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_csv(text, task_specs, name or os.path.basename(str(path)))


def parse_csv(text: str, task_specs: Sequence[TaskSpec], name: str = "dataset") -> Dataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].strip():
        raise DataFormatError("missing or empty header", line=1)

    cols = lines[0].split(",")
    task_cols = [c for c in cols if c.startswith(TASK_PREFIX)]
    n_feat = len(cols) - len(task_cols)
    expected = [f"feat_{j}" for j in range(n_feat)] + [TASK_PREFIX + t.name for t in task_specs]
    if n_feat < 1 or cols != expected:
        raise DataFormatError(f"header {cols} does not match expected {expected}", line=1)

    n_tasks = len(task_specs)
    feats = np.empty((len(lines) - 1, n_feat))
    labels = np.empty((n_tasks, len(lines) - 1), dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        fields = line.split(",")
        if len(fields) != len(cols):
            raise DataFormatError(f"expected {len(cols)} columns, got {len(fields)}", line=lineno)
        try:
            feats[i] = [float(v) for v in fields[:n_feat]]
            labels[:, i] = [int(v) for v in fields[n_feat:]]
        except ValueError as exc:
            raise DataFormatError(f"malformed value: {exc}", line=lineno) from None
        if not np.all(np.isfinite(feats[i])):
            raise DataFormatError("non-finite feature", line=lineno)
        for task, y in zip(task_specs, labels[:, i]):
            lo, hi = task.label_range
            if not lo <= y <= hi:
                raise DataFormatError(
                    f"task {task.name!r}: label {y} outside [{lo}, {hi}]", line=lineno
                )
    if len(feats) == 0:
        raise DataFormatError("no data rows", line=2)
    return Dataset(feats, tuple(labels), tuple(task_specs), name)


def split(ds: Dataset, test_fraction: float, seed: int):
    """Seeded shuffle, then the first ``round(n * test_fraction)`` rows go to test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(round(len(ds) * test_fraction))
    if n_test < 1 or n_test >= len(ds):
        raise ValueError(f"test_fraction {test_fraction} leaves an empty part for n={len(ds)}")
    perm = _rng(seed, 4).permutation(len(ds))
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return ds.subset(train_idx, ds.name + ":train"), ds.subset(test_idx, ds.name + ":test")
