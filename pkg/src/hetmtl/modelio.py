"""Plain-text model file.

Layout (one record per line, ``\\n`` newlines)::

    HETMTL-MODEL 1
    input_dim <int>
    trunk_layers <w1>,<w2>,...
    seed <int>
    task <name>:<kind>:<size>          # one line per task, in head order
    param <name> <rows> <cols> <v0> <v1> ...   # row-major, repr() floats

Biases and ``log_var`` are stored with ``rows = 1``. Parameters appear in
``ModelParams.named_arrays`` order; the file ends with ``end``.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelFormatError
from .losses import TaskSpec
from .net import ModelParams, NetConfig, init_params, same_structure

MAGIC = "HETMTL-MODEL"
VERSION = 1


def dumps(params: ModelParams) -> str:
    cfg = params.config
    lines = [
        f"{MAGIC} {VERSION}",
        f"input_dim {cfg.input_dim}",
        "trunk_layers " + ",".join(str(w) for w in cfg.trunk_layers),
        f"seed {cfg.seed}",
    ]
    lines += [f"task {t}" for t in cfg.tasks]
    for name, arr in params.named_arrays():
        rows, cols = (1, arr.size) if arr.ndim == 1 else arr.shape
        vals = " ".join(repr(float(v)) for v in arr.ravel())
        lines.append(f"param {name} {rows} {cols} {vals}".rstrip())
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ModelParams:
    lines = text.split("\n")
    head = lines[0].split() if lines else []
    if len(head) != 2 or head[0] != MAGIC:
        raise ModelFormatError(f"missing version header (expected '{MAGIC} {VERSION}')")
    if head[1] != str(VERSION):
        raise ModelFormatError(f"unsupported version header {head[1]!r}")
    try:
        fields = {}
        tasks = []
        arrays = {}
        for line in lines[1:]:
            if not line or line == "end":
                continue
            key, _, rest = line.partition(" ")
            if key == "task":
                tasks.append(TaskSpec.parse(rest))
            elif key == "param":
                parts = rest.split(" ")
                name, rows, cols = parts[0], int(parts[1]), int(parts[2])
                vals = np.array([float(v) for v in parts[3:]], dtype=np.float64)
                if vals.size != rows * cols:
                    raise ModelFormatError(f"{name}: expected {rows * cols} values, got {vals.size}")
                arrays[name] = vals.reshape(rows, cols)
            else:
                fields[key] = rest
        if lines[-1] != "" or "end" not in lines:
            raise ModelFormatError("truncated model file")
        cfg = NetConfig(
            int(fields["input_dim"]),
            tuple(int(w) for w in fields["trunk_layers"].split(",")),
            tuple(tasks),
            int(fields["seed"]),
        )
    except ModelFormatError:
        raise
    except (KeyError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None

    template = init_params(cfg)
    names = [n for n, _ in template.named_arrays()]
    if sorted(names) != sorted(arrays):
        raise ModelFormatError("parameter names do not match the stored network config")
    it = iter(names)

    def fill(a):
        stored = arrays[next(it)]
        if stored.shape != ((1, a.size) if a.ndim == 1 else a.shape):
            raise ModelFormatError("parameter shape does not match the stored network config")
        return stored.reshape(a.shape).copy()

    params = template.map(fill)
    assert same_structure(params, template)
    return params


def save_model(params: ModelParams, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(params))


def load_model(path) -> ModelParams:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads(fh.read())
