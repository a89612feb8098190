import numpy as np
import pytest

from hetmtl.data import Dataset, GenConfig, generate, load, parse_csv, save, split, to_csv
from hetmtl.errors import DataFormatError
from hetmtl.losses import TaskSpec

TASKS = (TaskSpec.ordinal("age", 4), TaskSpec.nominal("group", 3))


def _mutual_information(a, b):
    """Plug-in MI estimate (nats) from the empirical contingency table."""
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1)
    joint /= joint.sum()
    pa, pb = joint.sum(axis=1, keepdims=True), joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


class TestGenerate:
    def test_deterministic(self):
        cfg = GenConfig(n=300, tasks=TASKS, seed=3)
        a, b = generate(cfg), generate(cfg)
        np.testing.assert_array_equal(a.features, b.features)
        for x, y in zip(a.labels, b.labels):
            np.testing.assert_array_equal(x, y)

    def test_shapes_and_ranges(self):
        ds = generate(GenConfig(n=500, feature_dim=7, tasks=TASKS, label_noise=(0.3, 0.3)))
        assert ds.features.shape == (500, 7)
        assert ds.labels[0].min() >= 1 and ds.labels[0].max() <= 4
        assert ds.labels[1].min() >= 0 and ds.labels[1].max() <= 2

    def test_ordinal_ranks_equiprobable(self):
        ds = generate(GenConfig(n=100_000, tasks=(TaskSpec.ordinal("a", 4),), seed=1))
        freq = np.bincount(ds.labels[0], minlength=5)[1:] / 100_000
        assert np.all(np.abs(freq - 0.25) < 0.02)

    def test_cross_task_dependence(self):
        ds = generate(GenConfig(n=100_000, tasks=TASKS, seed=2))
        assert _mutual_information(ds.labels[0], ds.labels[1]) > 0.01

    @pytest.mark.parametrize("task", [TaskSpec.ordinal("a", 6), TaskSpec.ordinal("b", 2),
                                      TaskSpec.nominal("c", 4)])
    def test_flip_rate_matches_noise(self, task):
        clean = generate(GenConfig(n=20_000, tasks=(task,), seed=5))
        noisy = generate(GenConfig(n=20_000, tasks=(task,), label_noise=(0.4,), seed=5))
        np.testing.assert_array_equal(clean.features, noisy.features)
        rate = np.mean(clean.labels[0] != noisy.labels[0])
        assert abs(rate - 0.4) < 0.02

    def test_ordinal_noise_is_one_rank(self):
        task = TaskSpec.ordinal("a", 5)
        clean = generate(GenConfig(n=5000, tasks=(task,), seed=5))
        noisy = generate(GenConfig(n=5000, tasks=(task,), label_noise=(0.3,), seed=5))
        assert np.abs(clean.labels[0] - noisy.labels[0]).max() == 1

    def test_noise_bound(self):
        with pytest.raises(ValueError):
            GenConfig(tasks=TASKS, label_noise=(0.5, 0.0))


class TestCsv:
    def test_roundtrip(self, tmp_path):
        ds = generate(GenConfig(n=50, feature_dim=5, tasks=TASKS))
        path = tmp_path / "d.csv"
        save(ds, path)
        back = load(path, TASKS)
        for x, y in zip(ds.labels, back.labels):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_allclose(back.features, ds.features, rtol=5e-9, atol=1e-300)

    def test_header_and_line_count(self):
        ds = generate(GenConfig(n=10, feature_dim=2, tasks=TASKS))
        lines = to_csv(ds).split("\n")
        assert lines[0] == "feat_0,feat_1,task:age,task:group"
        assert len(lines) == 12 and lines[-1] == ""

    def test_rejects_label_out_of_range(self):
        text = "feat_0,task:age,task:group\n0.5,2,1\n0.1,5,0\n"
        with pytest.raises(DataFormatError, match="line 3"):
            parse_csv(text, TASKS)

    def test_rejects_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError, match="header"):
            load(path, TASKS)

    def test_rejects_wrong_columns(self):
        with pytest.raises(DataFormatError, match="line 2"):
            parse_csv("feat_0,task:age,task:group\n0.5,2\n", TASKS)

    def test_rejects_bad_value(self):
        with pytest.raises(DataFormatError, match="line 2"):
            parse_csv("feat_0,task:age,task:group\nabc,2,1\n", TASKS)

    def test_rejects_mismatched_header(self):
        with pytest.raises(DataFormatError, match="line 1"):
            parse_csv("feat_0,task:group,task:age\n0.5,1,2\n", TASKS)


class TestSplit:
    def test_sizes(self):
        ds = generate(GenConfig(n=10, tasks=TASKS))
        tr, te = split(ds, 0.2, seed=0)
        assert (len(tr), len(te)) == (8, 2)

    def test_partition(self):
        n = 97
        ds = Dataset(np.arange(n, dtype=float)[:, None], (np.ones(n, int),), (TaskSpec.ordinal("a", 2),))
        tr, te = split(ds, 0.3, seed=4)
        a, b = set(tr.features[:, 0]), set(te.features[:, 0])
        assert a | b == set(range(n)) and not a & b

    def test_deterministic(self):
        ds = generate(GenConfig(n=40, tasks=TASKS))
        a, b = split(ds, 0.25, 9), split(ds, 0.25, 9)
        np.testing.assert_array_equal(a[1].features, b[1].features)

    @pytest.mark.parametrize("frac", [0.0, 1.0, 0.01])
    def test_empty_part(self, frac):
        ds = generate(GenConfig(n=10, tasks=TASKS))
        with pytest.raises(ValueError):
            split(ds, frac, 0)


def test_select_tasks():
    ds = generate(GenConfig(n=20, tasks=TASKS))
    only = ds.select_tasks(["group"])
    assert only.tasks == (TASKS[1],)
    np.testing.assert_array_equal(only.labels[0], ds.labels[1])
