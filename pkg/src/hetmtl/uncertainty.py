"""Homoscedastic-uncertainty weighting of task losses.

Each task t owns a learnable log-variance ``s_t = log sigma_t^2``. The joint
objective is

    sum_t exp(-s_t) * L_t + 0.5 * s_t

so a task's effective weight is ``1 / sigma_t^2`` and the ``0.5 * s_t`` term
(``log sigma_t``) keeps the variances from growing without bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError


@dataclass(frozen=True)
class LossReport:
    per_task_loss: np.ndarray
    joint_loss: float
    log_var: np.ndarray
    sigma_sq: np.ndarray
    beta: np.ndarray


def _check_finite(values, what):
    values = np.asarray(values, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteError(f"non-finite {what}", task=int(bad[0]))
    return values


def joint_loss(task_losses, log_var):
    """Combine per-task losses.

    Returns:
        ``(joint, d_joint/d_loss, d_joint/d_log_var)``. The last two are
        vectors of length T.
    """
    losses = _check_finite(task_losses, "task loss")
    s = _check_finite(log_var, "log variance")
    if losses.shape != s.shape:
        raise ValueError(f"{losses.size} losses for {s.size} log variances")
    neg = np.flatnonzero(losses < 0)
    if neg.size:
        raise ValueError(f"task {int(neg[0])}: negative loss {losses[neg[0]]}")

    precision = np.exp(-s)
    joint = float(np.sum(precision * losses + 0.5 * s))
    return joint, precision, 0.5 - precision * losses


def beta_weights(log_var) -> np.ndarray:
    """Normalized task weights ``(1/sigma_t^2) / sum_j (1/sigma_j^2)``."""
    neg_s = -np.asarray(log_var, dtype=np.float64)
    e = np.exp(neg_s - neg_s.max())
    return e / e.sum()


def loss_report(task_losses, log_var) -> LossReport:
    s = np.asarray(log_var, dtype=np.float64)
    joint, _, _ = joint_loss(task_losses, s)
    return LossReport(
        per_task_loss=np.asarray(task_losses, dtype=np.float64),
        joint_loss=joint,
        log_var=s.copy(),
        sigma_sq=np.exp(s),
        beta=beta_weights(s),
    )


def optimal_log_var(loss: float) -> float:
    """Closed-form minimizer ``ln(2L)`` of ``exp(-s) * L + s / 2`` for fixed L > 0."""
    if not loss > 0:
        raise ValueError(f"loss must be positive, got {loss}")
    return float(np.log(2.0 * loss))
