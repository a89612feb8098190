"""Task definitions and per-task losses.

Nominal attributes use softmax cross-entropy. Ordinal attributes with ranks
``1..K`` are split into ``K - 1`` binary "rank > k" subproblems, each trained
with binary cross-entropy and decoded by counting positive subproblems.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

from .errors import LabelError, NonFiniteError

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class TaskKind(str, enum.Enum):
    NOMINAL = "nominal"
    ORDINAL = "ordinal"


@dataclass(frozen=True)
class TaskSpec:
    """One attribute to estimate.

    ``size`` is the class count C for a nominal task and the rank count K
    for an ordinal one.
    """

    name: str
    kind: TaskKind
    size: int

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if not _NAME_RE.match(self.name):
            raise ValueError(f"invalid task name {self.name!r}")
        if int(self.size) != self.size or self.size < 2:
            what = "classes" if self.kind is TaskKind.NOMINAL else "ranks"
            raise ValueError(f"task {self.name!r}: need at least 2 {what}, got {self.size}")
        object.__setattr__(self, "size", int(self.size))

    @classmethod
    def nominal(cls, name: str, classes: int) -> "TaskSpec":
        return cls(name, TaskKind.NOMINAL, classes)

    @classmethod
    def ordinal(cls, name: str, ranks: int) -> "TaskSpec":
        return cls(name, TaskKind.ORDINAL, ranks)

    @classmethod
    def parse(cls, text: str) -> "TaskSpec":
        """Parse ``name:kind:size``, e.g. ``age:ordinal:8``."""
        parts = [p.strip() for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"expected name:kind:size, got {text!r}")
        name, kind, size = parts
        try:
            return cls(name, TaskKind(kind.lower()), int(size))
        except ValueError as exc:
            raise ValueError(f"bad task {text!r}: {exc}") from None

    def __str__(self):
        return f"{self.name}:{self.kind.value}:{self.size}"

    @property
    def is_ordinal(self) -> bool:
        return self.kind is TaskKind.ORDINAL

    @property
    def head_width(self) -> int:
        return self.size - 1 if self.is_ordinal else self.size

    @property
    def label_range(self) -> tuple[int, int]:
        """Inclusive (low, high) bounds of a valid label."""
        return (1, self.size) if self.is_ordinal else (0, self.size - 1)

    def check_labels(self, labels) -> np.ndarray:
        return _check_range(labels, *self.label_range, what=f"task {self.name!r}: ")


def _check_range(labels, lo, hi, what=""):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise LabelError(f"{what}labels must be a vector")
    bad = np.flatnonzero((labels < lo) | (labels > hi))
    if bad.size:
        i = int(bad[0])
        raise LabelError(f"{what}label {labels[i]} outside [{lo}, {hi}]", row=i)
    return labels.astype(np.int64, copy=False)


def _softplus(x):
    # log(1 + e^x) without overflow
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def nominal_loss(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to ``logits``.

    Args:
        logits: (B, C) raw scores.
        labels: (B,) class indices in ``[0, C)``.

    Returns:
        ``(loss, dlogits)`` with ``dlogits = (softmax - onehot) / B``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("logits must be a (B, C) matrix")
    batch, classes = logits.shape
    labels = _check_range(labels, 0, classes - 1)
    if len(labels) != batch:
        raise ValueError(f"{len(labels)} labels for {batch} rows")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_prob = shifted - log_norm[:, None]
    rows = np.arange(batch)
    loss = -log_prob[rows, labels].sum() / batch

    grad = np.exp(log_prob)
    grad[rows, labels] -= 1.0
    grad /= batch
    return float(loss), grad


def ordinal_encode(y, num_ranks: int) -> np.ndarray:
    """Rank code of ``y``: bit ``k`` (1-based) is set iff ``y > k``.

    Accepts a scalar rank or a vector of ranks; a vector gives one code per row.
    """
    y_arr = np.asarray(y)
    lo, hi = 1, num_ranks
    if np.any((y_arr < lo) | (y_arr > hi)):
        raise LabelError(f"rank {y} outside [1, {num_ranks}]")
    thresholds = np.arange(1, num_ranks)
    return (y_arr[..., None] > thresholds).astype(np.int64)


def ordinal_decode(logits):
    """Predicted rank ``1 + #{k : logit_k > 0}``.

    Works on a single logit vector (returns an int) or a (B, K-1) matrix
    (returns a vector). Non-monotone bit patterns are summed as-is; a logit of
    exactly zero counts as a negative answer.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteError("non-finite ordinal logits")
    ranks = 1 + (logits > 0.0).sum(axis=-1)
    return int(ranks) if logits.ndim == 1 else ranks.astype(np.int64)


def ordinal_loss(logits, labels):
    """Summed binary cross-entropy over the rank subproblems, averaged over rows.

    Returns ``(loss, dlogits)``; ``dlogits = (sigmoid(logits) - code) / B``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("logits must be a (B, K-1) matrix")
    batch, width = logits.shape
    labels = _check_range(labels, 1, width + 1)
    if len(labels) != batch:
        raise ValueError(f"{len(labels)} labels for {batch} rows")

    code = ordinal_encode(labels, width + 1).astype(np.float64)
    # -log sigmoid(x) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x)
    per_bit = code * _softplus(-logits) + (1.0 - code) * _softplus(logits)
    loss = per_bit.sum() / batch
    grad = (sigmoid(logits) - code) / batch
    return float(loss), grad


def task_loss(task: TaskSpec, logits, labels):
    if task.is_ordinal:
        return ordinal_loss(logits, labels)
    return nominal_loss(logits, labels)
