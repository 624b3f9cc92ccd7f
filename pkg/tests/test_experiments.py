import csv
import json

import numpy as np
import pytest

from gradctl.experiments import (export_gradient_field, reproduce_fig2, reproduce_fig3, reproduce_fig4,
                                 stable_seed, worker_count)
from gradctl.plants import oscillator_problem


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_stable_seed_is_stable():
    assert stable_seed(0, 30, 2, "ghjb") == stable_seed(0, 30, 2, "ghjb")
    assert stable_seed(0, 30, 2, "ghjb") != stable_seed(0, 30, 2, "direct")
    assert stable_seed(5, "a") - stable_seed(0, "a") == 5


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("GRADCTL_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("GRADCTL_THREADS")
    assert worker_count() == 1


def test_fig2_csv_and_determinism(tmp_path):
    rows = reproduce_fig2("direct", 6, rounds=1, out_dir=tmp_path / "a")
    reproduce_fig2("direct", 6, rounds=1, out_dir=tmp_path / "b")
    assert [r for r, _ in rows] == [1, 2]
    a, b = (tmp_path / d / "fig2_direct_6.csv" for d in "ab")
    assert a.read_bytes() == b.read_bytes()
    assert _read(a)[0] == ["round", "test_cost"]
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["figure"] == "fig2"


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        reproduce_fig2("sgd", 6, rounds=1)


def test_fig3_trajectories(tmp_path):
    trajs, rounds = reproduce_fig3("direct", 6, rounds=1, out_dir=tmp_path)
    assert set(trajs) == {"initial", "best", "final"} and rounds["initial"] == 1
    init = trajs["initial"]
    np.testing.assert_array_equal(init.states[0], [0.0, 1.0])
    assert np.linalg.norm(init.states[-1]) < 0.05
    header = _read(tmp_path / "fig3_direct_6_initial.csv")[0]
    assert header == ["t", "x1", "x2", "u1", "cumulative_cost"]


def test_fig4_records(tmp_path):
    records, summary, ref = reproduce_fig4((5,), runs_per_count=2, rounds=2, out_dir=tmp_path)
    assert len(records) == 4
    assert ref == min(r.best_cost for r in records)
    assert set(summary) == {(5, "ghjb"), (5, "direct")}
    for r in records:
        assert 1 <= r.best_round <= 3 and np.isfinite(r.best_cost)
    assert _read(tmp_path / "fig4_summary.csv")[0] == ["feature_count", "method", "median_best_cost",
                                                       "relative_to_reference"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["reference_cost"] == ref


def test_fig4_parallel_matches_serial():
    serial = reproduce_fig4((5,), 2, 1, methods=("direct",), workers=1)[0]
    parallel = reproduce_fig4((5,), 2, 1, methods=("direct",), workers=2)[0]
    assert serial == parallel


def test_gradient_field(tmp_path):
    problem = oscillator_problem()
    rows = export_gradient_field(problem.initial_controller(), problem, grid=5, out_path=tmp_path / "f.csv")
    assert rows.shape == (25, 5)
    origin = rows[np.all(rows[:, :2] == 0, axis=1)][0]
    assert np.linalg.norm(origin[2:4]) < 0.01
    reached = ~np.isnan(rows[:, 2])
    assert reached.all()
    assert set(np.unique(rows[reached, 4])) <= {-1.0, 0.0, 1.0}
    assert _read(tmp_path / "f.csv")[0] == ["x1", "x2", "g1", "g2", "sign"]
