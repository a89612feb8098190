"""Evaluation metrics for nominal and ordinal predictions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .losses import TaskSpec


def _pair(preds, labels):
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"preds {p.shape} and labels {y.shape} must be equal-length vectors")
    if p.size == 0:
        raise ValueError("empty input")
    return p, y


def accuracy(preds, labels) -> float:
    p, y = _pair(preds, labels)
    return float(np.mean(p == y))


def mae_mse(preds, labels) -> tuple[float, float]:
    p, y = _pair(preds, labels)
    err = p.astype(np.float64) - y
    return float(np.mean(np.abs(err))), float(np.mean(err * err))


def cumulative_score(preds, labels, num_ranks: int) -> np.ndarray:
    """CS(i) = fraction of samples with ``|pred - label| <= i`` for i = 0..K-1."""
    p, y = _pair(preds, labels)
    if p.min() < 1 or y.min() < 1 or p.max() > num_ranks or y.max() > num_ranks:
        raise ValueError(f"ranks must lie in [1, {num_ranks}]")
    err = np.abs(p.astype(np.int64) - y)
    counts = np.bincount(err, minlength=num_ranks)
    return np.cumsum(counts) / p.size


def confusion_matrix(preds, labels, num_classes: int, offset: int = 0) -> np.ndarray:
    """Entry ``(r, c)`` counts samples labelled ``r`` predicted as ``c``.

    ``offset`` is the smallest valid value (1 for ranks).
    """
    p, y = _pair(preds, labels)
    p = p.astype(np.int64) - offset
    y = y.astype(np.int64) - offset
    if min(p.min(), y.min()) < 0 or max(p.max(), y.max()) >= num_classes:
        raise ValueError(f"values outside [{offset}, {offset + num_classes - 1}]")
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(out, (y, p), 1)
    return out


@dataclass(frozen=True)
class TaskMetrics:
    task: TaskSpec
    accuracy: float
    confusion: np.ndarray
    mae: Optional[float] = None
    mse: Optional[float] = None
    cs_curve: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MetricsReport:
    n: int
    tasks: tuple

    def __getitem__(self, name) -> TaskMetrics:
        for m in self.tasks:
            if m.task.name == name:
                return m
        raise KeyError(name)

    def to_text(self) -> str:
        """Flat ``key = value`` lines; floats use ``repr`` so values round-trip."""
        lines = [f"n = {self.n}"]
        for m in self.tasks:
            key = m.task.name
            lines.append(f"{key}.kind = {m.task.kind.value}")
            lines.append(f"{key}.size = {m.task.size}")
            lines.append(f"{key}.accuracy = {m.accuracy!r}")
            if m.task.is_ordinal:
                lines.append(f"{key}.mae = {m.mae!r}")
                lines.append(f"{key}.mse = {m.mse!r}")
                lines.append(f"{key}.cs = " + ",".join(repr(float(v)) for v in m.cs_curve))
            for r, row in enumerate(m.confusion):
                lines.append(f"{key}.confusion.{r} = " + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def task_metrics(task: TaskSpec, preds, labels) -> TaskMetrics:
    acc = accuracy(preds, labels)
    if task.is_ordinal:
        mae, mse = mae_mse(preds, labels)
        return TaskMetrics(
            task, acc, confusion_matrix(preds, labels, task.size, offset=1),
            mae=mae, mse=mse, cs_curve=cumulative_score(preds, labels, task.size),
        )
    return TaskMetrics(task, acc, confusion_matrix(preds, labels, task.size))


def build_report(tasks, preds, labels) -> MetricsReport:
    per_task = tuple(task_metrics(t, p, y) for t, p, y in zip(tasks, preds, labels))
    return MetricsReport(len(labels[0]), per_task)


def parse_report(text: str) -> dict:
    """Read a report written by ``MetricsReport.to_text`` back into a dict of strings."""
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out[key] = value
    return out
