"""Dense shared-trunk network with per-task heads, hand-written backprop and SGD.

Layout: ``x -> [affine -> ReLU] * L -> head_t (affine)`` for every task t.
Weight matrices are stored ``(fan_in, fan_out)`` so a layer is ``h @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DimensionError, NonFiniteError
from .losses import task_loss
from .uncertainty import joint_loss


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    trunk_layers: tuple
    tasks: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trunk_layers", tuple(int(w) for w in self.trunk_layers))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.trunk_layers or min(self.trunk_layers) < 1:
            raise ValueError("trunk_layers must be a non-empty list of positive widths")
        if not self.tasks:
            raise ValueError("at least one task is required")
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate task names in {names}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def widths(self) -> tuple:
        return (self.input_dim,) + self.trunk_layers


@dataclass
class ModelParams:
    """Parameter tree. Also used for gradients and optimizer velocity."""

    config: NetConfig
    trunk: list
    heads: list
    log_var: np.ndarray

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, (w, b) in enumerate(self.trunk):
            yield f"trunk.{i}.weight", w
            yield f"trunk.{i}.bias", b
        for task, (w, b) in zip(self.config.tasks, self.heads):
            yield f"head.{task.name}.weight", w
            yield f"head.{task.name}.bias", b
        yield "log_var", self.log_var

    def arrays(self) -> list:
        return [a for _, a in self.named_arrays()]

    def map(self, fn) -> "ModelParams":
        """New tree with ``fn`` applied to every array (in ``named_arrays`` order)."""
        return ModelParams(
            self.config,
            [(fn(w), fn(b)) for w, b in self.trunk],
            [(fn(w), fn(b)) for w, b in self.heads],
            fn(self.log_var),
        )

    def copy(self) -> "ModelParams":
        return self.map(np.copy)

    def zeros_like(self) -> "ModelParams":
        return self.map(np.zeros_like)

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        offset = 0

        def take(a):
            nonlocal offset
            out = vec[offset:offset + a.size].reshape(a.shape).copy()
            offset += a.size
            return out

        out = self.map(take)
        if offset != vec.size:
            raise DimensionError(f"vector has {vec.size} entries, tree has {offset}")
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


Gradients = ModelParams


def same_structure(a: ModelParams, b: ModelParams) -> bool:
    """True when both trees hold the same names with the same shapes."""
    sa = [(n, x.shape) for n, x in a.named_arrays()]
    sb = [(n, x.shape) for n, x in b.named_arrays()]
    return sa == sb


def init_params(cfg: NetConfig) -> ModelParams:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x1A17]))

    def layer(fan_in, fan_out):
        a = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-a, a, size=(fan_in, fan_out)), np.zeros(fan_out)

    widths = cfg.widths
    trunk = [layer(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
    heads = [layer(widths[-1], t.head_width) for t in cfg.tasks]
    return ModelParams(cfg, trunk, heads, np.zeros(len(cfg.tasks)))


def _trunk_forward(params: ModelParams, features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"features must be a non-empty 2-D matrix, got shape {x.shape}")
    pre_acts, inputs = [], []
    h = x
    for i, (w, b) in enumerate(params.trunk):
        if h.shape[1] != w.shape[0]:
            raise DimensionError(
                f"trunk layer {i}: expects width {w.shape[0]}, got {h.shape[1]}"
            )
        inputs.append(h)
        z = h @ w + b
        pre_acts.append(z)
        h = np.maximum(z, 0.0)
    return h, inputs, pre_acts


def forward(params: ModelParams, features) -> list:
    """Per-task logit matrices, one ``(B, head_width)`` array per task."""
    h, _, _ = _trunk_forward(params, features)
    return [h @ w + b for w, b in params.heads]


@dataclass(frozen=True)
class LossDef:
    """How task losses are combined.

    With ``fixed_weights`` unset, the uncertainty objective over the model's
    log-variances is used. Otherwise the joint loss is ``sum_t w_t * L_t`` and
    the log-variances receive zero gradient.
    """

    tasks: tuple
    fixed_weights: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.fixed_weights is not None:
            w = tuple(float(v) for v in self.fixed_weights)
            if len(w) != len(self.tasks):
                raise ValueError(f"{len(w)} fixed weights for {len(self.tasks)} tasks")
            object.__setattr__(self, "fixed_weights", w)


@dataclass
class StepResult:
    joint_loss: float
    grads: ModelParams
    task_losses: np.ndarray


def loss_and_grad(params: ModelParams, features, labels: Sequence, loss_def: LossDef) -> StepResult:
    """Joint loss, its gradient tree, and the raw per-task losses."""
    tasks = loss_def.tasks
    if len(tasks) != len(params.heads) or len(labels) != len(tasks):
        raise DimensionError(
            f"{len(params.heads)} heads, {len(tasks)} tasks, {len(labels)} label columns"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss_and_grad(params, features, labels, loss_def)


def _loss_and_grad(params, features, labels, loss_def):
    # overflow surfaces as a NonFiniteError below, not as a numpy warning
    tasks = loss_def.tasks
    h, inputs, pre_acts = _trunk_forward(params, features)

    losses = np.zeros(len(tasks))
    dlogits = []
    for t, (task, (w, b), y) in enumerate(zip(tasks, params.heads, labels)):
        if h.shape[1] != w.shape[0]:
            raise DimensionError(f"head {task.name!r}: expects width {w.shape[0]}, got {h.shape[1]}")
        loss, d = task_loss(task, h @ w + b, y)
        if not np.isfinite(loss):
            raise NonFiniteError(f"non-finite loss for {task.name!r}", task=t)
        losses[t] = loss
        dlogits.append(d)

    if loss_def.fixed_weights is None:
        joint, d_loss, d_log_var = joint_loss(losses, params.log_var)
    else:
        weights = np.asarray(loss_def.fixed_weights)
        joint = float(np.sum(weights * losses))
        d_loss, d_log_var = weights, np.zeros_like(params.log_var)

    head_grads = []
    dh = np.zeros_like(h)
    for (w, _), d, scale in zip(params.heads, dlogits, d_loss):
        d = d * scale
        head_grads.append((h.T @ d, d.sum(axis=0)))
        dh += d @ w.T

    trunk_grads = [None] * len(params.trunk)
    for i in reversed(range(len(params.trunk))):
        dz = dh * (pre_acts[i] > 0.0)
        trunk_grads[i] = (inputs[i].T @ dz, dz.sum(axis=0))
        if i:
            dh = dz @ params.trunk[i][0].T

    grads = ModelParams(params.config, trunk_grads, head_grads, np.asarray(d_log_var, dtype=np.float64))
    return StepResult(joint, grads, losses)


def backward(params: ModelParams, features, labels: Sequence, loss_def: LossDef):
    """``(joint_loss, gradients)`` of the combined objective."""
    res = loss_and_grad(params, features, labels, loss_def)
    return res.joint_loss, res.grads


@dataclass
class OptimState:
    """SGD with momentum and decoupled-from-bias L2 weight decay.

    ``head_weight_decay`` overrides ``weight_decay`` for the task heads when
    set; trunk weights always use ``weight_decay``.
    """

    velocity: ModelParams
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    head_weight_decay: Optional[float] = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0 or (self.head_weight_decay or 0) < 0:
            raise ValueError("weight decay must be nonnegative")

    @classmethod
    def zeros(cls, params: ModelParams, **kw) -> "OptimState":
        return cls(params.zeros_like(), **kw)


def sgd_step(params: ModelParams, grads: ModelParams, state: OptimState):
    """One momentum step. Returns new ``(params, state)``; inputs are not mutated.

    Weight decay acts on weight matrices only, never on biases or log-variances.
    """
    if not (same_structure(params, grads) and same_structure(params, state.velocity)):
        raise DimensionError("params, grads and velocity trees differ")
    head_decay = state.weight_decay if state.head_weight_decay is None else state.head_weight_decay
    lr, mu = state.learning_rate, state.momentum

    def update(p, g, v, decay):
        v_new = mu * v + g
        if decay:
            v_new = v_new + decay * p
        return p - lr * v_new, v_new

    def update_layers(ps, gs, vs, decay):
        new_p, new_v = [], []
        for (pw, pb), (gw, gb), (vw, vb) in zip(ps, gs, vs):
            w, vw2 = update(pw, gw, vw, decay)
            b, vb2 = update(pb, gb, vb, 0.0)
            new_p.append((w, b))
            new_v.append((vw2, vb2))
        return new_p, new_v

    vel = state.velocity
    trunk, v_trunk = update_layers(params.trunk, grads.trunk, vel.trunk, state.weight_decay)
    heads, v_heads = update_layers(params.heads, grads.heads, vel.heads, head_decay)
    log_var, v_log_var = update(params.log_var, grads.log_var, vel.log_var, 0.0)

    new_params = ModelParams(params.config, trunk, heads, log_var)
    new_vel = ModelParams(params.config, v_trunk, v_heads, v_log_var)
    if not (new_params.is_finite() and new_vel.is_finite()):
        raise NonFiniteError("non-finite parameter update")
    new_state = OptimState(
        new_vel, state.learning_rate, state.momentum, state.weight_decay, state.head_weight_decay
    )
    return new_params, new_state
