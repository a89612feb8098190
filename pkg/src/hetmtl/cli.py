"""Command-line entry point: ``hetmtl {gen-data,train,eval,ablation}``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import modelio
from .config import RunConfig, load_config
from .errors import ConfigError
from .trainer import ablation_run, evaluate, train

log = logging.getLogger("hetmtl")


class Outputs:
    """Stage output files and publish them together.

    Files are written under temporary names; :meth:`commit` renames them all.
    If the block exits with an exception every staged file is removed.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.staged = []

    def path(self, name) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out_dir / p

    def write_text(self, name, text) -> Path:
        final = self.path(name)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.with_name(final.name + ".partial")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.staged.append((tmp, final))
        return final

    def stage_file(self, name, writer) -> Path:
        """Let ``writer(path)`` produce a file (e.g. a figure) under a staged name."""
        final = self.path(name)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.with_name(final.name + ".partial")
        self.staged.append((tmp, final))
        writer(tmp)
        return final

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for tmp, final in self.staged:
                os.replace(tmp, final)
        else:
            for tmp, _ in self.staged:
                if tmp.exists():
                    tmp.unlink()
        return False


def _fmt(v) -> str:
    return repr(float(v))


def trace_csv(traces, task_names) -> str:
    cols = ["epoch", "joint_loss"]
    for name in task_names:
        cols += [f"{name}_loss", f"{name}_log_var", f"{name}_sigma_sq", f"{name}_beta"]
    lines = [",".join(cols)]
    for t in traces:
        row = [str(t.epoch), _fmt(t.joint_loss)]
        for i in range(len(task_names)):
            row += [_fmt(t.per_task_loss[i]), _fmt(t.log_var[i]), _fmt(t.sigma_sq[i]), _fmt(t.beta[i])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def step_trace_csv(traces, task_names) -> str:
    body = trace_csv(traces, task_names).split("\n")
    lines = ["step," + body[0]] + [f"{t.step},{row}" for t, row in zip(traces, body[1:])]
    return "\n".join(lines) + "\n"


def _png_name(name, suffix):
    p = Path(name)
    return str(p.with_name(p.stem + suffix + ".png"))


def _load_dataset(cfg: RunConfig, out: Outputs):
    path = out.path(cfg.data_in)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    return data_mod.load(path, cfg.tasks)


def cmd_gen_data(cfg: RunConfig, out: Outputs):
    ds = data_mod.generate(cfg.gen_config())
    path = out.write_text(cfg.data_out, data_mod.to_csv(ds))
    print(f"wrote {path}: n={len(ds)} D={ds.feature_dim}")
    for task, y in zip(ds.tasks, ds.labels):
        lo, hi = task.label_range
        counts = np.bincount(y - lo, minlength=hi - lo + 1)
        hist = " ".join(f"{lo + i}:{c}" for i, c in enumerate(counts))
        print(f"  {task.name} ({task.kind.value}) {hist}")


def cmd_train(cfg: RunConfig, out: Outputs):
    ds = _load_dataset(cfg, out)
    train_part, test_part = data_mod.split(ds, cfg.test_fraction, cfg.seed)
    names = [t.name for t in cfg.tasks]
    step_rows = []
    on_step = step_rows.append if cfg.step_trace_out else None
    params, traces = train(cfg.net_config(ds.feature_dim), cfg.train_config(), train_part, on_step=on_step)
    report = evaluate(params, test_part)

    out.write_text(cfg.model_out, modelio.dumps(params))
    out.write_text(cfg.trace_out, trace_csv(traces, names))
    out.write_text(cfg.report_out, report.to_text())
    if cfg.step_trace_out:
        out.write_text(cfg.step_trace_out, step_trace_csv(step_rows, names))
    if cfg.figures:
        from . import plotting

        out.stage_file(_png_name(cfg.trace_out, ""), lambda p: plotting.plot_trace(traces, names, p))
        out.stage_file(_png_name(cfg.report_out, "_cs"), lambda p: plotting.plot_cumulative_score(report, p))
        out.stage_file(_png_name(cfg.report_out, "_confusion"), lambda p: plotting.plot_confusion(report, p))
    _print_report(report, len(traces))


def _eval_part(cfg: RunConfig, ds):
    if cfg.eval_split == "all":
        return ds
    train_part, test_part = data_mod.split(ds, cfg.test_fraction, cfg.seed)
    return test_part if cfg.eval_split == "test" else train_part


def cmd_eval(cfg: RunConfig, out: Outputs):
    model_path = out.path(cfg.model_in)
    if not model_path.exists():
        raise FileNotFoundError(f"model file not found: {model_path}")
    params = modelio.load_model(model_path)
    ds = _load_dataset(cfg, out)
    if ds.feature_dim != params.config.input_dim:
        raise ValueError(
            f"shape mismatch: model expects {params.config.input_dim} features, data has {ds.feature_dim}"
        )
    if [t.name for t in params.config.tasks] != [t.name for t in ds.tasks]:
        raise ValueError("shape mismatch: model tasks do not match dataset tasks")
    report = evaluate(params, _eval_part(cfg, ds))
    out.write_text(cfg.report_out, report.to_text())
    if cfg.figures:
        from . import plotting

        out.stage_file(_png_name(cfg.report_out, "_cs"), lambda p: plotting.plot_cumulative_score(report, p))
        out.stage_file(_png_name(cfg.report_out, "_confusion"), lambda p: plotting.plot_confusion(report, p))
    _print_report(report)


def ablation_table(rows, tasks):
    """CSV text plus per-mode means; data rows keep the order of ``rows``."""
    metric_cols = [f"{t.name}_accuracy" for t in tasks]
    for t in tasks:
        if t.is_ordinal:
            metric_cols += [f"{t.name}_mae", f"{t.name}_mse"]

    def metrics_of(report):
        vals = [report[t.name].accuracy for t in tasks]
        for t in tasks:
            if t.is_ordinal:
                vals += [report[t.name].mae, report[t.name].mse]
        return vals

    lines = [",".join(["mode", "seed"] + metric_cols)]
    by_mode = {}
    for r in rows:
        vals = metrics_of(r.report)
        by_mode.setdefault(r.mode.value, []).append(vals)
        lines.append(",".join([r.mode.value, str(r.seed)] + [_fmt(v) for v in vals]))
    summary = {}
    for mode, vals in by_mode.items():
        means = np.mean(np.array(vals), axis=0)
        summary[mode] = dict(zip(metric_cols, means))
        lines.append(",".join([mode, "mean"] + [_fmt(v) for v in means]))
    return "\n".join(lines) + "\n", summary


def cmd_ablation(cfg: RunConfig, out: Outputs):
    ds = _load_dataset(cfg, out)
    base_train = cfg.train_config()
    rows = ablation_run(
        cfg.net_config(ds.feature_dim),
        base_train,
        ds,
        seeds=cfg.ablation_seeds,
        test_fraction=cfg.test_fraction,
        jobs=cfg.jobs,
    )
    text, summary = ablation_table(rows, ds.tasks)
    path = out.write_text(cfg.ablation_out, text)
    if cfg.figures:
        from . import plotting

        metrics = [k for k in next(iter(summary.values())) if k.endswith("_mae") or k.endswith("_accuracy")]
        out.stage_file(_png_name(cfg.ablation_out, ""), lambda p: plotting.plot_ablation(summary, metrics, p))
    print(f"wrote {path}")
    for mode, means in summary.items():
        print(f"  {mode}: " + " ".join(f"{k}={v:.4f}" for k, v in means.items()))


def _print_report(report, epochs=None):
    if epochs is not None:
        print(f"trained {epochs} epochs; test n={report.n}")
    for m in report.tasks:
        line = f"  {m.task.name}: accuracy={m.accuracy:.4f}"
        if m.task.is_ordinal:
            line += f" mae={m.mae:.4f} mse={m.mse:.4f}"
        print(line)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablation": cmd_ablation,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetmtl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", help="overrides the config seed")
        p.add_argument("--out-dir", default=".", help="base directory for relative paths")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seed": args.seed} if args.seed is not None else None
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with Outputs(out_dir) as out:
            COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
