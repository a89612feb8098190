"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments; there are no sections. Unknown keys
and out-of-range values raise :class:`ConfigError` naming the key.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Optional

from .data import GenConfig
from .errors import ConfigError
from .losses import TaskSpec
from .net import NetConfig
from .trainer import Mode, TrainConfig


def _tasks(text):
    return tuple(TaskSpec.parse(p) for p in text.split(",") if p.strip())


def _floats(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _ints(text):
    return tuple(int(p) for p in text.split(",") if p.strip())


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        return None if text.lower() in ("", "none") else conv(text)

    return parse


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("must fit in an unsigned 64-bit integer")
    return v


@dataclass
class RunConfig:
    # dataset / generator
    tasks: tuple = (TaskSpec.ordinal("age", 8), TaskSpec.nominal("group", 4))
    n: int = 2000
    latent_dim: int = 4
    feature_dim: int = 16
    label_noise: Optional[tuple] = None
    test_fraction: float = 0.2
    # network
    trunk_layers: tuple = (32,)
    # training (defaults follow the published setup)
    epochs: int = 80
    learning_rate: float = 0.001
    weight_decay: float = 0.0005
    head_weight_decay: Optional[float] = None
    batch_size: int = 32
    momentum: float = 0.9
    mode: Mode = Mode.FULL
    fixed_weights: Optional[tuple] = None
    seed: int = 0
    ablation_seeds: tuple = (0, 1, 2, 3, 4)
    jobs: int = 1
    # outputs; relative paths resolve against --out-dir
    data_in: str = "data.csv"
    data_out: str = "data.csv"
    model_in: str = "model.txt"
    model_out: str = "model.txt"
    trace_out: str = "trace.csv"
    step_trace_out: Optional[str] = None
    report_out: str = "report.txt"
    ablation_out: str = "ablation.csv"
    eval_split: str = "test"
    figures: bool = True

    def net_config(self, input_dim: Optional[int] = None) -> NetConfig:
        return NetConfig(
            input_dim or self.feature_dim, self.trunk_layers, self.tasks, self.seed
        )

    def train_config(self) -> TrainConfig:
        fixed = self.fixed_weights
        if self.mode is Mode.NO_UNCERTAINTY and fixed is None:
            fixed = tuple([1.0 / len(self.tasks)] * len(self.tasks))
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            head_weight_decay=self.head_weight_decay,
            batch_size=self.batch_size,
            momentum=self.momentum,
            seed=self.seed,
            mode=self.mode,
            fixed_weights=fixed,
        )

    def gen_config(self) -> GenConfig:
        return GenConfig(
            n=self.n,
            latent_dim=self.latent_dim,
            feature_dim=self.feature_dim,
            tasks=self.tasks,
            label_noise=self.label_noise,
            seed=self.seed,
        )

    def validate(self) -> "RunConfig":
        """Cross-field checks; each failure names one key."""
        checks = [
            ("n", self.n >= 1, "must be >= 1"),
            ("latent_dim", self.latent_dim >= 1, "must be >= 1"),
            ("feature_dim", self.feature_dim >= 1, "must be >= 1"),
            ("test_fraction", 0 < self.test_fraction < 1, "must lie in (0, 1)"),
            ("trunk_layers", bool(self.trunk_layers) and min(self.trunk_layers) >= 1,
             "must be a non-empty list of positive widths"),
            ("epochs", self.epochs >= 0, "must be >= 0"),
            ("learning_rate", self.learning_rate > 0, "must be > 0"),
            ("weight_decay", self.weight_decay >= 0, "must be >= 0"),
            ("head_weight_decay", self.head_weight_decay is None or self.head_weight_decay >= 0,
             "must be >= 0"),
            ("batch_size", self.batch_size >= 1, "must be >= 1"),
            ("momentum", 0 <= self.momentum < 1, "must lie in [0, 1)"),
            ("jobs", self.jobs >= 1, "must be >= 1"),
            ("ablation_seeds", len(self.ablation_seeds) >= 1, "must list at least one seed"),
            ("eval_split", self.eval_split in ("all", "train", "test"),
             "must be one of all, train, test"),
            ("tasks", len({t.name for t in self.tasks}) == len(self.tasks) and bool(self.tasks),
             "must be non-empty with unique names"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(msg, key=key)
        if self.label_noise is not None:
            if len(self.label_noise) != len(self.tasks):
                raise ConfigError("needs one value per task", key="label_noise")
            if any(not 0 <= p < 0.5 for p in self.label_noise):
                raise ConfigError("values must lie in [0, 0.5)", key="label_noise")
        if self.fixed_weights is not None:
            w = self.fixed_weights
            if len(w) != len(self.tasks) or min(w) < 0 or abs(sum(w) - 1) > 1e-9:
                raise ConfigError("needs one nonnegative weight per task, summing to 1",
                                  key="fixed_weights")
        return self


_PARSERS = {
    "tasks": _tasks,
    "n": int,
    "latent_dim": int,
    "feature_dim": int,
    "label_noise": _optional(_floats),
    "test_fraction": float,
    "trunk_layers": _ints,
    "epochs": int,
    "learning_rate": float,
    "weight_decay": float,
    "head_weight_decay": _optional(float),
    "batch_size": int,
    "momentum": float,
    "mode": Mode,
    "fixed_weights": _optional(_floats),
    "seed": _u64,
    "ablation_seeds": lambda t: tuple(_u64(p) for p in t.split(",") if p.strip()),
    "jobs": int,
    "step_trace_out": _optional(str),
    "eval_split": str,
    "figures": _bool,
}

KNOWN_KEYS = frozenset(f.name for f in fields(RunConfig))
assert KNOWN_KEYS == set(_PARSERS) | {
    "data_in", "data_out", "model_in", "model_out", "trace_out", "report_out", "ablation_out",
}


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=key or None)
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key (line {lineno})", key=key)
        if key in values:
            raise ConfigError(f"duplicate key (line {lineno})", key=key)
        values[key] = value
    parsed = {}
    for key, value in {**values, **(overrides or {})}.items():
        conv = _PARSERS.get(key, str)
        try:
            parsed[key] = conv(value) if isinstance(value, str) else value
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", key=key) from None
    return RunConfig(**parsed).validate()


def load_config(path: Optional[str], overrides: Optional[dict] = None) -> RunConfig:
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text, overrides)


def dump_config(cfg: RunConfig) -> str:
    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, Mode):
            return v.value
        if isinstance(v, tuple):
            return ",".join(str(x) for x in v)
        return str(v)

    return "".join(f"{f.name} = {fmt(getattr(cfg, f.name))}\n" for f in dataclasses.fields(cfg))
