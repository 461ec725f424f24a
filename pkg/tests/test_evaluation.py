import numpy as np
import pytest

from rffblr import Dataset, InvalidArgument, TrainConfig
from rffblr.evaluation import bench, cross_validate, fold_workers, summarize, sweep_m
from rffblr.synthetic import make_sparse_rff

FAST = TrainConfig(max_iterations=30, warmup_sweeps=5)


@pytest.fixture(scope="module")
def toy():
    prob = make_sparse_rff(90, 3, 2, m=30, n_active=4, gamma=0.2, seed=8)
    return Dataset(prob.X, prob.Y)


class TestCrossValidate:
    def test_rows_in_fold_order(self, toy):
        rows, summary = cross_validate(toy, FAST, k=3)
        assert [(r["fold"], r["task"]) for r in rows] == [(f, t) for f in range(3) for t in ("y0", "y1")]
        assert summary["overall"]["n_scores"] == 6
        assert sum(r["n_test"] for r in rows[::2]) == 90

    def test_parallel_matches_serial(self, toy):
        serial, _ = cross_validate(toy, FAST, k=3, workers=1)
        parallel, _ = cross_validate(toy, FAST, k=3, workers=3)
        assert serial == parallel

    def test_seed_controls_split(self, toy):
        a, _ = cross_validate(toy, FAST, k=3, seed=1)
        b, _ = cross_validate(toy, FAST, k=3, seed=2)
        assert [r["r2"] for r in a] != [r["r2"] for r in b]

    def test_constant_test_fold_is_nan(self):
        X = np.arange(12.0)[:, None]
        Y = np.column_stack([np.arange(12.0), np.ones(12)])
        rows, summary = cross_validate(Dataset(X, Y), FAST, k=3)
        assert all(np.isnan(r["r2"]) for r in rows if r["task"] == "y1")
        assert summary["per_task"][1]["n_scores"] == 0


class TestSummary:
    def test_population_sd_over_all_scores(self):
        rows = [dict(fold=f, task=t, r2=v, active_features=5)
                for f, (t, v) in enumerate([("a", 0.0), ("b", 1.0)])]
        s = summarize(rows, ["a", "b"], 2, 0)
        assert (s["overall"]["mean_r2"], s["overall"]["sd_r2"]) == (0.5, 0.5)
        assert s["sd"] == "population"


class TestSweepM:
    def test_rows_and_bound(self, toy):
        rows = sweep_m(toy, [8, 16, 32], FAST, k=3)
        assert [r["M_initial"] for r in rows] == [8, 16, 32]
        assert all(r["M_final"] <= r["M_initial"] for r in rows)

    def test_needs_values(self, toy):
        with pytest.raises(InvalidArgument):
            sweep_m(toy, [], FAST)


class TestBench:
    def test_one_row_per_pair(self):
        rows = bench([40, 80], [1, 2], repeats=1, m=16, max_iterations=3)
        assert [(r["N"], r["C"]) for r in rows] == [(40, 1), (40, 2), (80, 1), (80, 2)]
        assert all(r["mean_seconds"] > 0 for r in rows)

    def test_rejects_zero_repeats(self):
        with pytest.raises(InvalidArgument):
            bench([10], [1], repeats=0)


class TestWorkers:
    def test_default_serial(self):
        assert fold_workers({}) == 1

    def test_zero_means_all_cores(self):
        assert fold_workers({"RFFBLR_THREADS": "0"}) >= 1

    def test_explicit(self):
        assert fold_workers({"RFFBLR_THREADS": "3"}) == 3

    @pytest.mark.parametrize("value", ["-1", "many"])
    def test_invalid(self, value):
        with pytest.raises(InvalidArgument):
            fold_workers({"RFFBLR_THREADS": value})
