"""Figures written next to the CSV/text outputs.

All functions take already-computed traces or reports and write one PNG.
The Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "figure.dpi": 100,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _figure(nrows=1, ncols=1, width=6.4, height=None):
    golden = (np.sqrt(5) - 1.0) / 2.0
    height = height or width * golden * nrows / ncols
    return plt.subplots(nrows, ncols, figsize=(width, height), squeeze=False)


def _save(fig, path):
    # no Software/date metadata, so reruns give identical bytes
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_trace(traces, task_names, path):
    """Task-weight (beta) and sigma^2 trajectories over epochs, plus the joint loss."""
    with plt.rc_context(_RC):
        fig, axes = _figure(3, 1, height=7.5)
        ax_beta, ax_sig, ax_loss = axes[:, 0]
        if traces:
            epochs = [t.epoch for t in traces]
            beta = np.array([t.beta for t in traces])
            sig = np.array([t.sigma_sq for t in traces])
            for i, name in enumerate(task_names):
                ax_beta.plot(epochs, beta[:, i], label=name)
                ax_sig.plot(epochs, sig[:, i], label=name)
            ax_loss.plot(epochs, [t.joint_loss for t in traces], color="k")
            ax_beta.legend()
        ax_beta.set_ylabel(r"$\beta$")
        ax_beta.set_ylim(0, 1)
        ax_sig.set_ylabel(r"$\sigma^2$")
        ax_loss.set_ylabel("joint loss")
        ax_loss.set_xlabel("epoch")
        fig.tight_layout()
        _save(fig, path)


def plot_cumulative_score(report, path):
    ordinal = [m for m in report.tasks if m.task.is_ordinal]
    with plt.rc_context(_RC):
        fig, axes = _figure()
        ax = axes[0, 0]
        for m in ordinal:
            ax.plot(np.arange(len(m.cs_curve)), 100 * m.cs_curve, marker="o", ms=3, label=m.task.name)
        ax.set_xlabel("error level")
        ax.set_ylabel("cumulative score (%)")
        ax.set_ylim(0, 101)
        if ordinal:
            ax.legend()
        fig.tight_layout()
        _save(fig, path)


def plot_confusion(report, path):
    n = len(report.tasks)
    with plt.rc_context({**_RC, "axes.grid": False}):
        fig, axes = _figure(1, n, width=4.0 * n, height=3.8)
        for ax, m in zip(axes[0], report.tasks):
            cm = m.confusion
            rows = cm.sum(axis=1, keepdims=True)
            frac = np.divide(cm, rows, out=np.zeros(cm.shape), where=rows > 0)
            ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
            offset = 1 if m.task.is_ordinal else 0
            ticks = np.arange(cm.shape[0])
            ax.set_xticks(ticks, [str(t + offset) for t in ticks])
            ax.set_yticks(ticks, [str(t + offset) for t in ticks])
            ax.set_xlabel("predicted")
            ax.set_ylabel("label")
            ax.set_title(m.task.name)
        fig.tight_layout()
        _save(fig, path)


def plot_ablation(summary, metric_names, path):
    """Grouped bars: ``summary`` maps mode -> {metric: mean value}."""
    modes = list(summary)
    x = np.arange(len(metric_names))
    width = 0.8 / max(len(modes), 1)
    with plt.rc_context(_RC):
        fig, axes = _figure(width=1.6 * len(metric_names) + 3)
        ax = axes[0, 0]
        for i, mode in enumerate(modes):
            ax.bar(x + i * width, [summary[mode][k] for k in metric_names], width, label=mode)
        ax.set_xticks(x + width * (len(modes) - 1) / 2, metric_names)
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
