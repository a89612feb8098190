import numpy as np
import pytest

from hetmtl.losses import TaskSpec
from hetmtl.net import LossDef, NetConfig, forward, init_params


@pytest.fixture
def two_tasks():
    return (TaskSpec.ordinal("age", 5), TaskSpec.nominal("gender", 3))


def reference_joint(params, features, labels, loss_def):
    """Joint objective evaluated directly from the formulas, without the
    package's loss or backward code. Used as the finite-difference target."""
    total = 0.0
    for t, (task, logits, y) in enumerate(zip(loss_def.tasks, forward(params, features), labels)):
        y = np.asarray(y)
        n = len(y)
        if task.is_ordinal:
            k = np.arange(1, task.size)
            code = (y[:, None] > k).astype(float)
            p = 1.0 / (1.0 + np.exp(-logits))
            loss = -np.sum(code * np.log(p) + (1 - code) * np.log(1 - p)) / n
        else:
            m = logits.max(axis=1, keepdims=True)
            lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
            loss = np.sum(lse - logits[np.arange(n), y]) / n
        if loss_def.fixed_weights is None:
            s = params.log_var[t]
            total += np.exp(-s) * loss + 0.5 * s
        else:
            total += loss_def.fixed_weights[t] * loss
    return total


def central_difference(params, features, labels, loss_def, step=1e-5):
    flat = params.flatten()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += step
        down[i] -= step
        f_up = reference_joint(params.unflatten(up), features, labels, loss_def)
        f_down = reference_joint(params.unflatten(down), features, labels, loss_def)
        grad[i] = (f_up - f_down) / (2 * step)
    return grad


def grad_errors(analytic, numeric, abs_floor=1e-6):
    """Per-entry relative error, counting entries below ``abs_floor`` in both as exact."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
    return np.where(diff < abs_floor, 0.0, rel)


def random_instance(rng, max_width=8, depth=1):
    """Random small net, params and batch for gradient checks."""
    input_dim = int(rng.integers(1, max_width + 1))
    hidden = [int(rng.integers(1, max_width + 1)) for _ in range(depth)]
    tasks = []
    for j in range(int(rng.integers(1, 3))):
        if rng.random() < 0.5:
            tasks.append(TaskSpec.ordinal(f"o{j}", int(rng.integers(2, 6))))
        else:
            tasks.append(TaskSpec.nominal(f"n{j}", int(rng.integers(2, 5))))
    cfg = NetConfig(input_dim, hidden, tasks, seed=int(rng.integers(0, 2**32)))
    params = init_params(cfg)
    params.log_var[:] = rng.normal(0.0, 1.0, size=len(tasks))
    for w, b in params.trunk + params.heads:
        b[:] = rng.normal(0.0, 0.5, size=b.shape)
    batch = int(rng.integers(1, 9))
    x = rng.normal(size=(batch, input_dim))
    labels = []
    for t in tasks:
        lo, hi = t.label_range
        labels.append(rng.integers(lo, hi + 1, size=batch))
    fixed = None
    if rng.random() < 0.2:
        w = rng.random(len(tasks))
        fixed = tuple(w / w.sum())
    return params, x, labels, LossDef(tasks, fixed)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
