"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the pytest terminal summary).
Tolerances are fixed here and must not be loosened to make a run pass.
"""

import contextlib
import time

import numpy as np
import pytest

from hetmtl import cli
from hetmtl.data import GenConfig, generate, split
from hetmtl.losses import TaskSpec, ordinal_decode, ordinal_encode
from hetmtl.metrics import accuracy, confusion_matrix, cumulative_score, mae_mse
from hetmtl.net import LossDef, NetConfig, OptimState, backward, init_params, loss_and_grad, sgd_step
from hetmtl.trainer import Mode, TrainConfig, ablation_run, evaluate, train
from hetmtl.uncertainty import beta_weights, joint_loss, optimal_log_var

from conftest import central_difference, grad_errors, random_instance

RESULTS = []

TASKS = (TaskSpec.ordinal("age", 8), TaskSpec.nominal("group", 4))
SEEDS = (0, 1, 2, 3, 4)
TRUNK = (32,)
TIE = 0.05


@contextlib.contextmanager
def criterion(name):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        RESULTS.append(f"FAIL  {name}  ({time.perf_counter() - t0:.1f}s): {str(exc).splitlines()[0]}")
        raise
    RESULTS.append(f"PASS  {name}  ({time.perf_counter() - t0:.1f}s)")


def _dataset(noise=0.0, seed=0):
    return generate(GenConfig(n=2000, latent_dim=4, feature_dim=16, tasks=TASKS,
                              label_noise=(noise, 0.0), seed=seed))


@pytest.fixture(scope="module")
def ablation_rows():
    return ablation_run(NetConfig(16, TRUNK, TASKS), TrainConfig(), _dataset(), seeds=SEEDS)


def _mean_mae(rows, mode):
    return float(np.mean([r.report["age"].mae for r in rows if r.mode is mode]))


def test_gradient_oracle():
    with criterion("gradient oracle: 100 random nets, central FD step 1e-5, rel < 1e-4, < 30 s"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            params, x, labels, loss_def = random_instance(rng, max_width=8)
            _, g = backward(params, x, labels, loss_def)
            num = central_difference(params, x, labels, loss_def, step=1e-5)
            worst = max(worst, grad_errors(g.flatten(), num, abs_floor=1e-6).max())
        elapsed = time.perf_counter() - t0
        assert worst < 1e-4, f"worst relative error {worst:.3g}"
        assert elapsed < 30, f"took {elapsed:.1f}s"


def test_degeneracy():
    with criterion("degeneracy: log_var = 0 gives joint = sum of task losses to 1e-12"):
        rng = np.random.default_rng(1)
        for _ in range(200):
            params, x, labels, _ = random_instance(rng)
            params.log_var[:] = 0.0
            loss_def = LossDef(params.config.tasks)
            res = loss_and_grad(params, x, labels, loss_def)
            assert abs(res.joint_loss - res.task_losses.sum()) <= 1e-12


def test_stationarity():
    with criterion("stationarity: SGD on s alone reaches ln(2L) within 1e-4"):
        cfg = NetConfig(1, [1], [TaskSpec.nominal("t", 2)])
        for loss in (0.1, 0.5, 2.0):
            params = init_params(cfg)
            state = OptimState.zeros(params, learning_rate=0.01, momentum=0.9, weight_decay=0.0005)
            for _ in range(20_000):
                grads = params.zeros_like()
                grads.log_var[:] = joint_loss([loss], params.log_var)[2]
                params, state = sgd_step(params, grads, state)
            target = optimal_log_var(loss)
            assert abs(params.log_var[0] - target) < 1e-4, (loss, params.log_var[0], target)


def test_ordinal_roundtrip():
    with criterion("ordinal roundtrip: all y, all K in [2, 100], < 1 s"):
        t0 = time.perf_counter()
        for k in range(2, 101):
            for y in range(1, k + 1):
                code = ordinal_encode(y, k)
                assert ordinal_decode(np.where(code == 1, 5.0, -5.0)) == y
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_beta_simplex_and_shift():
    with criterion("beta: simplex and shift invariance to 1e-9 over 1000 vectors"):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            s = rng.normal(0, 3, int(rng.integers(1, 9)))
            b = beta_weights(s)
            assert abs(b.sum() - 1) <= 1e-9
            shifted = beta_weights(s + rng.uniform(-50, 50))
            assert np.max(np.abs(shifted - b)) <= 1e-9


def test_noise_uncertainty_monotonicity():
    name = "noise -> sigma^2: sigma_A^2 strictly increasing in noise {0, .2, .4} in >= 4/5 seeds, < 5 min"
    with criterion(name):
        t0 = time.perf_counter()
        ok = 0
        detail = []
        for seed in SEEDS:
            sig = []
            for noise in (0.0, 0.2, 0.4):
                _, traces = train(NetConfig(16, TRUNK, TASKS, seed), TrainConfig(seed=seed),
                                  _dataset(noise, seed))
                assert traces[-1].epoch == 80
                sig.append(traces[-1].sigma_sq[0])
            detail.append(np.round(sig, 3).tolist())
            ok += sig[0] < sig[1] < sig[2]
        elapsed = time.perf_counter() - t0
        assert ok >= 4, f"only {ok}/5 seeds monotone: {detail}"
        assert elapsed < 300, f"took {elapsed:.0f}s"


def test_ablation_full_vs_no_ordinal_opt(ablation_rows):
    with criterion("ablation: mean MAE full <= no_ordinal_opt (+0.05)"):
        full = _mean_mae(ablation_rows, Mode.FULL)
        other = _mean_mae(ablation_rows, Mode.NO_ORDINAL_OPT)
        assert full <= other + TIE, f"full {full:.4f} vs no_ordinal_opt {other:.4f}"


def test_ablation_full_vs_no_uncertainty(ablation_rows):
    with criterion("ablation: mean MAE full <= no_uncertainty at equal fixed weights (+0.05)"):
        full = _mean_mae(ablation_rows, Mode.FULL)
        other = _mean_mae(ablation_rows, Mode.NO_UNCERTAINTY)
        assert full <= other + TIE, f"full {full:.4f} vs no_uncertainty {other:.4f}"


def test_ablation_runtime():
    with criterion("ablation: 3 modes x 5 seeds in < 10 min"):
        t0 = time.perf_counter()
        rows = ablation_run(NetConfig(16, TRUNK, TASKS), TrainConfig(), _dataset(), seeds=SEEDS)
        elapsed = time.perf_counter() - t0
        assert len(rows) == 15
        assert elapsed < 600, f"took {elapsed:.0f}s"


def test_mtl_vs_single_task(ablation_rows):
    with criterion("MTL vs single task: two-task MAE <= single-task MAE + 0.05"):
        data = _dataset()
        single = data.select_tasks(["age"])
        maes = []
        for seed in SEEDS:
            tr, te = split(single, 0.2, seed)
            params, _ = train(NetConfig(16, TRUNK, single.tasks, seed), TrainConfig(seed=seed), tr)
            maes.append(evaluate(params, te)["age"].mae)
        multi = _mean_mae(ablation_rows, Mode.FULL)
        assert multi <= np.mean(maes) + TIE, f"multi {multi:.4f} vs single {np.mean(maes):.4f}"


def test_metrics_identities():
    with criterion("metrics identities on 1000 random vectors (exact)"):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            k = int(rng.integers(2, 12))
            n = int(rng.integers(1, 60))
            p = rng.integers(1, k + 1, n)
            y = rng.integers(1, k + 1, n)
            cs = cumulative_score(p, y, k)
            assert cs[0] == accuracy(p, y)
            assert np.all(np.diff(cs) >= 0) and cs[-1] == 1.0
            mae, mse = mae_mse(p, y)
            assert mae * mae <= mse
            cm = confusion_matrix(p, y, k, offset=1)
            assert np.array_equal(cm.sum(axis=1), np.bincount(y - 1, minlength=k))


def test_reproducibility(tmp_path):
    with criterion("reproducibility: byte-identical trace CSV and report over two full runs"):
        conf = tmp_path / "run.conf"
        conf.write_text("figures = false\nseed = 11\n")
        for run in ("a", "b"):
            out = tmp_path / run
            assert cli.main(["gen-data", "--config", str(conf), "--out-dir", str(out)]) == 0
            assert cli.main(["train", "--config", str(conf), "--out-dir", str(out)]) == 0
        for name in ("data.csv", "trace.csv", "report.txt", "model.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        assert len((tmp_path / "a/trace.csv").read_text().strip().split("\n")) == 81
