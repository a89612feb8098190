"""Training loop, prediction, and the ablation experiment.

Each step computes every task's loss on the batch, combines them into the
joint objective and takes one SGD step on all weights and log-variances.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .data import Dataset, split
from .errors import DimensionError, NonFiniteError
from .losses import TaskSpec, ordinal_decode
from .metrics import MetricsReport, build_report
from .net import LossDef, ModelParams, NetConfig, OptimState, forward, init_params, loss_and_grad, sgd_step
from .uncertainty import beta_weights

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    FULL = "full"
    NO_UNCERTAINTY = "no_uncertainty"
    NO_ORDINAL_OPT = "no_ordinal_opt"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 80
    learning_rate: float = 0.001
    weight_decay: float = 0.0005
    head_weight_decay: Optional[float] = None
    batch_size: int = 32
    momentum: float = 0.9
    seed: int = 0
    mode: Mode = Mode.FULL
    fixed_weights: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.fixed_weights is not None:
            object.__setattr__(self, "fixed_weights", tuple(float(w) for w in self.fixed_weights))
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode is Mode.NO_UNCERTAINTY:
            w = self.fixed_weights
            if w is None:
                raise ValueError("mode no_uncertainty needs fixed_weights")
            if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
                raise ValueError(f"fixed_weights must be nonnegative and sum to 1, got {w}")


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    joint_loss: float
    per_task_loss: np.ndarray
    log_var: np.ndarray
    sigma_sq: np.ndarray
    beta: np.ndarray
    step: Optional[int] = None


def training_tasks(tasks: Sequence[TaskSpec], mode: Mode) -> tuple:
    """Task list the network is actually built with for ``mode``."""
    if Mode(mode) is not Mode.NO_ORDINAL_OPT:
        return tuple(tasks)
    return tuple(TaskSpec.nominal(t.name, t.size) if t.is_ordinal else t for t in tasks)


def _training_labels(tasks, net_tasks, labels):
    # ranks 1..K become class indices 0..K-1 when the ordinal head is dropped
    return tuple(
        y - 1 if t.is_ordinal and not nt.is_ordinal else y
        for t, nt, y in zip(tasks, net_tasks, labels)
    )


def _trace(epoch, joint, losses, log_var, step=None) -> EpochTrace:
    s = np.array(log_var, dtype=np.float64)
    return EpochTrace(epoch, float(joint), np.asarray(losses, dtype=np.float64), s, np.exp(s), beta_weights(s), step)


def train(
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    data: Dataset,
    on_step: Optional[Callable[[EpochTrace], None]] = None,
):
    """Fit a model. Returns ``(params, traces)`` with one trace row per epoch.

    ``net_cfg.tasks`` must match ``data.tasks``; in ``no_ordinal_opt`` mode the
    ordinal heads are swapped for plain multiclass heads internally.
    ``on_step`` receives a per-step trace row when given.
    """
    if data.feature_dim != net_cfg.input_dim:
        raise DimensionError(f"data has {data.feature_dim} features, network expects {net_cfg.input_dim}")
    if tuple(net_cfg.tasks) != tuple(data.tasks):
        raise ValueError("network tasks do not match dataset tasks")

    net_tasks = training_tasks(net_cfg.tasks, train_cfg.mode)
    cfg = replace(net_cfg, tasks=net_tasks)
    labels = _training_labels(net_cfg.tasks, net_tasks, data.labels)
    fixed = train_cfg.fixed_weights if train_cfg.mode is Mode.NO_UNCERTAINTY else None
    loss_def = LossDef(net_tasks, fixed)

    params = init_params(cfg)
    state = OptimState.zeros(
        params,
        learning_rate=train_cfg.learning_rate,
        momentum=train_cfg.momentum,
        weight_decay=train_cfg.weight_decay,
        head_weight_decay=train_cfg.head_weight_decay,
    )
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 5]))
    n, bs = len(data), train_cfg.batch_size
    n_batches = -(-n // bs)
    traces = []
    step = 0
    for epoch in range(1, train_cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        joint_sum = 0.0
        loss_sum = np.zeros(len(net_tasks))
        for b in range(n_batches):
            idx = order[b * bs:(b + 1) * bs]
            try:
                res = loss_and_grad(params, data.features[idx], [y[idx] for y in labels], loss_def)
                params, state = sgd_step(params, res.grads, state)
            except NonFiniteError as exc:
                raise exc.with_context(epoch=epoch, batch=b) from None
            joint_sum += res.joint_loss
            loss_sum += res.task_losses
            step += 1
            if on_step is not None:
                on_step(_trace(epoch, res.joint_loss, res.task_losses, params.log_var, step))
        traces.append(_trace(epoch, joint_sum / n_batches, loss_sum / n_batches, params.log_var))
        log.debug("epoch %d joint %.6f", epoch, traces[-1].joint_loss)
    return params, traces


def predict(params: ModelParams, features, as_tasks: Optional[Sequence[TaskSpec]] = None) -> list:
    """Per-task predictions: class index for nominal heads, rank for ordinal ones.

    ``as_tasks`` lets a model trained without ordinal heads answer in ranks:
    a nominal head of width K standing in for an ordinal task with K ranks
    predicts ``argmax + 1``.
    """
    model_tasks = params.config.tasks
    as_tasks = model_tasks if as_tasks is None else tuple(as_tasks)
    if len(as_tasks) != len(model_tasks):
        raise DimensionError(f"model has {len(model_tasks)} tasks, {len(as_tasks)} requested")
    out = []
    for mt, want, logits in zip(model_tasks, as_tasks, forward(params, features)):
        if mt.size != want.size:
            raise DimensionError(f"task {want.name!r}: model size {mt.size}, data size {want.size}")
        if mt.is_ordinal:
            if not want.is_ordinal:
                raise DimensionError(f"task {want.name!r}: ordinal head cannot serve a nominal task")
            out.append(ordinal_decode(logits))
        else:
            # argmax returns the lowest index on ties
            cls = np.argmax(logits, axis=1).astype(np.int64)
            out.append(cls + 1 if want.is_ordinal else cls)
    return out


def evaluate(params: ModelParams, data: Dataset) -> MetricsReport:
    preds = predict(params, data.features, data.tasks)
    return build_report(data.tasks, preds, data.labels)


@dataclass(frozen=True)
class AblationRow:
    mode: Mode
    seed: int
    report: MetricsReport
    traces: tuple


ABLATION_MODES = (Mode.FULL, Mode.NO_ORDINAL_OPT, Mode.NO_UNCERTAINTY)


def _equal_weights(n_tasks):
    return tuple([1.0 / n_tasks] * n_tasks)


def _ablation_arm(args):
    mode, seed, net_cfg, train_cfg, data, test_fraction = args
    train_part, test_part = split(data, test_fraction, seed)
    fixed = train_cfg.fixed_weights
    if mode is Mode.NO_UNCERTAINTY and fixed is None:
        fixed = _equal_weights(len(net_cfg.tasks))
    tc = replace(train_cfg, mode=mode, seed=seed, fixed_weights=fixed)
    nc = replace(net_cfg, seed=seed)
    params, traces = train(nc, tc, train_part)
    return AblationRow(mode, seed, evaluate(params, test_part), tuple(traces))


def ablation_run(
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    data: Dataset,
    seeds: Sequence[int] = (0,),
    test_fraction: float = 0.2,
    jobs: int = 1,
) -> list:
    """Train every ablation mode for every seed; rows sorted by mode then seed.

    Each (mode, seed) arm shares the split and initialization seed. The
    ``no_uncertainty`` arm uses ``train_cfg.fixed_weights`` or equal weights.
    """
    kinds = {t.is_ordinal for t in data.tasks}
    if kinds != {True, False}:
        raise ValueError("ablation needs at least one ordinal and one nominal task")
    arms = [(m, int(s), net_cfg, train_cfg, data, test_fraction) for m in ABLATION_MODES for s in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_ablation_arm, arms))
    else:
        rows = [_ablation_arm(a) for a in arms]
    return sorted(rows, key=lambda r: (r.mode.value, r.seed))
