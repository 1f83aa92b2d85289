import csv

import numpy as np
import pytest

from rayclass import experiments as ex
from rayclass.dataset import Dataset
from rayclass.errors import EmptyDatasetError, ParameterError
from rayclass.nn import MlpParams, MlpSpec
from rayclass.scene import generate_scenes

FAST = dict(epochs=2, per_axis=8)


@pytest.fixture(scope="module")
def scenes():
    return generate_scenes(2, "double-dot", 3, 0)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_trial_seeds_independent():
    a = ex.trial_seeds(0, 6, 60, 0)
    assert a == ex.trial_seeds(0, 6, 60, 0)
    others = {ex.trial_seeds(0, 6, 60, 1), ex.trial_seeds(0, 6, 50, 0), ex.trial_seeds(1, 6, 60, 0),
              ex.trial_seeds(0, 5, 60, 0)}
    assert a not in others and len(others) == 4


def test_run_trial_deterministic(scenes):
    a = ex.run_trial(scenes, 4, 30, (8,), 0, 5, **FAST)
    b = ex.run_trial(scenes, 4, 30, (8,), 0, 5, **FAST)
    assert a == b and 0 <= a <= 1
    ds = ex.scene_dataset(scenes, 4, 30, 8)
    assert ex.run_trial(scenes, 4, 30, (8,), 0, 5, dataset=ds, epochs=2) == a
    with pytest.raises(ParameterError):
        ex.run_trial(scenes, 5, 30, (8,), 0, 5, dataset=ds)


def test_run_result_stats():
    r = ex.RunResult.from_accuracies(6, 60, [0.9, 0.92, 0.94])
    assert r.pixel_budget == 360 and r.n_runs == 3 and len(r.accuracies) == 3
    assert r.mu == pytest.approx(0.92) and r.sigma == pytest.approx(0.02)
    assert ex.RunResult.from_accuracies(1, 1, [0.5]).sigma == 0.0


def test_default_sweep_grid():
    spec = ex.SweepSpec()
    assert len(spec.ray_counts) * len(spec.ray_lengths_px) == 40
    assert spec.runs_per_cell == 50
    s3 = ex.SweepSpec.default_3d()
    assert s3.ray_counts[0] == 6 and s3.ray_counts[-1] == 18 and s3.ray_lengths_px == (60,)
    assert s3.runs_per_cell == 10
    with pytest.raises(ParameterError):
        ex.SweepSpec(ray_counts=())
    with pytest.raises(ParameterError):
        ex.SweepSpec(runs_per_cell=0)


def test_sweep_and_curves(tmp_path, scenes):
    spec = ex.SweepSpec(ray_counts=(3, 12), ray_lengths_px=(20, 80), runs_per_cell=2, arch=(8,), n_scenes=3,
                        per_axis=8, epochs=1)
    res = ex.sweep_2d(spec, scenes)
    assert [(r.M, r.r) for r in res] == [(3, 20), (3, 80), (12, 20), (12, 80)]
    assert res[-1].pixel_budget == 960 and all(r.n_runs == 2 for r in res)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    ex.emit_curves(res, p1)
    ex.emit_curves(ex.sweep_2d(spec, scenes), p2)
    assert p1.read_bytes() == p2.read_bytes()
    rows = read_csv(p1)
    assert len(rows) == 4
    for row, r in zip(rows, res):
        assert int(row["pixel_budget"]) == int(row["M"]) * int(row["r"])
        assert float(row["cnn_ref"]) == 0.959
        assert float(row["lo3"]) == pytest.approx(r.mu - 3 * r.sigma)
    with pytest.raises(ParameterError):
        ex.sweep_3d(spec)
    with pytest.raises(EmptyDatasetError):
        ex.emit_curves([], p1)


def test_emit_curves_arithmetic(tmp_path):
    p = tmp_path / "c.csv"
    ex.emit_curves([ex.RunResult(6, 60, 360, 0.9, 0.01, 10)], p, markers={"slices": 1234})
    row = read_csv(p)[0]
    assert float(row["lo3"]) == pytest.approx(0.87) and float(row["hi3"]) == pytest.approx(0.93)
    assert float(row["slices"]) == 1234


def test_emit_trials(tmp_path):
    p = tmp_path / "t.csv"
    ex.emit_trials([ex.RunResult.from_accuracies(3, 10, [0.1, 0.2])], p)
    assert [r["accuracy"] for r in read_csv(p)] == ["0.1", "0.2"]


def test_arch_sweep_table(tmp_path, scenes):
    cells = ((3, 20), (4, 20))
    archs = ((4,), (8, 4))
    table = ex.arch_sweep(scenes, archs, cells, runs=2, epochs=1, per_axis=8)
    assert len(table) == 4
    p = tmp_path / "a.csv"
    ex.emit_arch_table(table, p)
    rows = read_csv(p)
    assert [r["arch"] for r in rows] == ["4", "8-4"]
    assert "mu_3x20" in rows[0] and "sigma_4x20" in rows[0]


def test_default_arch_table_has_reference_values():
    assert len(ex.DEFAULT_ARCHS) == 4 and len(ex.DEFAULT_ARCH_CELLS) == 4
    assert sum(len(v) for v in ex.REFERENCE_TABLE_A1.values()) == 16
    assert ex.REFERENCE_TABLE_A1[(64, 32)][(6, 60)] == (96.3, 0.3)
    assert ex.REFERENCE_TABLE_A1[(512, 256, 64, 32)][(6, 60)] == (96.3, 0.3)


def test_failure_map(tmp_path, scenes):
    test_scenes = generate_scenes(2, "double-dot", 3, 99)
    params = MlpParams(MlpSpec(6, (4,), 5))
    rows = ex.failure_map(params, test_scenes, 6, 50, per_axis=37, train_seeds=[s.seed for s in scenes])
    assert len(rows) == 4107
    for row in rows[::50]:
        assert row.correct == (row.true == row.pred) and row.boundary_distance >= 0
    # zero network predicts class 0 everywhere
    assert all(r.correct == (r.true == 0) for r in rows)
    p = tmp_path / "f.csv"
    ex.emit_failure_map(rows, p)
    back = read_csv(p)
    assert len(back) == 4107
    assert all(int(r["correct"]) == int(r["true"] == r["pred"]) for r in back)
    with pytest.raises(ParameterError):
        ex.failure_map(params, scenes, 6, 50, train_seeds=[scenes[0].seed])


def test_failure_map_all_correct():
    sc = generate_scenes(2, "double-dot", 1, 5)
    # a network that ignores its input and always answers DD is right only on DD cells
    params = MlpParams(MlpSpec(6, (), 5))
    params.layers[0][1][4] = 1.0
    rows = ex.failure_map(params, sc, 6, 30, per_axis=10)
    assert {r.pred for r in rows} == {4}
    only_dd = [r for r in rows if r.true == 4]
    assert all(r.correct for r in only_dd)
    bad, good = ex.failure_medians(only_dd)
    assert np.isnan(bad) and good >= 0


def test_class_means():
    fp = np.array([[0.1, 0.2, 0.3]] * 4)
    ds = Dataset(["s"] * 4, np.zeros((4, 2)), fp, [0] * 4, [False] * 4, 3, 10)
    np.testing.assert_array_equal(ex.class_mean_fingerprints(ds), fp[:1])
    ds2 = Dataset(["s"] * 2, np.zeros((2, 2)), fp[:2], [0, 0], [False] * 2, 3, 10, {"class_names": ["a", "b"]})
    with pytest.raises(EmptyDatasetError):
        ex.class_mean_fingerprints(ds2)


def test_class_means_sparse_nd(tmp_path, scenes):
    ds = ex.scene_dataset(scenes, 12, 20, 20)
    means = ex.class_mean_fingerprints(ds)
    nd = ds.fingerprints[ds.labels == 0]
    np.testing.assert_allclose(means[0], nd.mean(axis=0))
    # rays pointing away from every line (down-left from the origin corner) find nothing
    assert means[0][6:9].max() < means[0].max()
    p = tmp_path / "m.csv"
    ex.emit_class_means(ds, p)
    rows = read_csv(p)
    assert [r["class_name"] for r in rows] == ["ND", "SD_L", "SD_C", "SD_R", "DD"]


def test_circular_xcorr():
    a = np.array([1.0, 0, 0, 0])
    b = np.array([0, 0, 1.0, 0])
    c = ex.circular_xcorr(a, b)
    assert int(np.argmax(c)) == 2 and c.tolist() == [0, 0, 1, 0]
    rng = np.random.default_rng(0)
    x = rng.random(12)
    assert int(np.argmax(ex.circular_xcorr(x, np.roll(x, 6)))) == 6
    with pytest.raises(ParameterError):
        ex.circular_xcorr([1, 2], [1, 2, 3])
