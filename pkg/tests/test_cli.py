import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rffblr import NumericalFailure, load_model, predict
from rffblr.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from rffblr.synthetic import make_sparse_rff

FAST = ["--max-iter", "25"]


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    prob = make_sparse_rff(60, 3, 2, m=30, n_active=4, gamma=0.2, seed=11)
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "c", "t1", "t2"])
        for x, y in zip(prob.X, prob.Y):
            w.writerow([repr(float(v)) for v in (*x, *y)])
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestTrain:
    def test_outputs(self, data_csv, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--data", str(data_csv), "--targets", "2", "--m", "40",
                     "--out", str(out), *FAST]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["active_features"] <= report["m_initial"] == 40
        for key in ("elbo_trace", "gamma_trace", "active_trace", "noise_sd", "config"):
            assert key in report
        assert report["tasks"] == ["t1", "t2"]
        assert json.loads((out / "timing.json").read_text())["wall_time_seconds"] > 0
        assert load_model(out / "model.npz").active_features == report["active_features"]

    def test_report_reproducible(self, data_csv, tmp_path):
        for name in ("a", "b"):
            main(["train", "--data", str(data_csv), "--targets", "2", "--seed", "3",
                  "--out", str(tmp_path / name), *FAST])
        assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()

    def test_figures(self, data_csv, tmp_path):
        main(["train", "--data", str(data_csv), "--targets", "2", "--out", str(tmp_path),
              "--figures", *FAST])
        assert (tmp_path / "history.png").stat().st_size > 0

    def test_explicit_gamma0(self, data_csv, tmp_path):
        main(["train", "--data", str(data_csv), "--targets", "2", "--gamma0", "0.25",
              "--out", str(tmp_path), "--max-iter", "1"])
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["gamma_trace"][0] == 0.25


class TestErrors:
    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "absent.csv"
        assert main(["train", "--data", str(missing), "--targets", "1"]) == EXIT_DATA
        assert str(missing) in capsys.readouterr().err

    def test_one_fold(self, data_csv):
        assert main(["cv", "--data", str(data_csv), "--targets", "2", "--folds", "1"]) == EXIT_USAGE

    @pytest.mark.parametrize("argv", [["train"], ["frobnicate"], [],
                                      ["train", "--data", "x.csv", "--targets", "0"],
                                      ["train", "--data", "x.csv", "--targets", "1", "--gamma0", "-1"],
                                      ["train", "--data", "x.csv", "--targets", "1", "--gamma0", "wide"]])
    def test_usage(self, argv):
        assert main(argv) == EXIT_USAGE

    def test_bad_cell(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n1,2\n3,oops\n")
        assert main(["train", "--data", str(p), "--targets", "1"]) == EXIT_DATA
        assert "oops" in capsys.readouterr().err

    def test_numerical(self, data_csv, tmp_path, monkeypatch):
        import rffblr.cli as cli

        def broken(*args, **kwargs):
            raise NumericalFailure("iteration 4: not positive definite")

        monkeypatch.setattr(cli, "fit", broken)
        assert main(["train", "--data", str(data_csv), "--targets", "2",
                     "--out", str(tmp_path)]) == EXIT_NUMERICAL

    def test_bad_thread_setting(self, data_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("RFFBLR_THREADS", "lots")
        assert main(["cv", "--data", str(data_csv), "--targets", "2", "--folds", "2",
                     "--out", str(tmp_path)]) == EXIT_USAGE


@pytest.fixture(scope="module")
def model_path(data_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    main(["train", "--data", str(data_csv), "--targets", "2", "--out", str(out), *FAST])
    return out / "model.npz"


class TestPredict:
    def test_with_and_without_targets(self, data_csv, model_path, tmp_path):
        names = _rows(data_csv)
        X = np.array([[float(r[k]) for k in ("a", "b", "c")] for r in names])
        inputs = tmp_path / "inputs.csv"
        with open(inputs, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "c"])
            w.writerows([[repr(float(v)) for v in row] for row in X])
        expected = predict(load_model(model_path), X)
        for source in (data_csv, inputs):
            out = tmp_path / "pred.csv"
            assert main(["predict", "--model", str(model_path), "--data", str(source),
                         "--out", str(out)]) == EXIT_OK
            got = np.array([[float(r["t1"]), float(r["t2"])] for r in _rows(out)])
            np.testing.assert_array_equal(got, expected)

    def test_wrong_width(self, model_path, tmp_path):
        p = tmp_path / "narrow.csv"
        p.write_text("a,b\n1,2\n3,4\n")
        assert main(["predict", "--model", str(model_path), "--data", str(p)]) == EXIT_DATA

    def test_not_a_model(self, data_csv, tmp_path):
        assert main(["predict", "--model", str(data_csv), "--data", str(data_csv)]) == EXIT_DATA


class TestCv:
    def test_outputs_and_determinism(self, data_csv, tmp_path):
        for name in ("a", "b"):
            assert main(["cv", "--data", str(data_csv), "--targets", "2", "--folds", "3",
                         "--seed", "2", "--out", str(tmp_path / name), *FAST]) == EXIT_OK
        for f in ("folds.csv", "summary.csv", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        rows = _rows(tmp_path / "a/folds.csv")
        assert len(rows) == 6
        summary = json.loads((tmp_path / "a/summary.json").read_text())
        mean = np.mean([float(r["r2"]) for r in rows])
        assert summary["overall"]["mean_r2"] == pytest.approx(mean, rel=1e-12)
        assert [r["task"] for r in _rows(tmp_path / "a/summary.csv")] == ["t1", "t2", "__all__"]


class TestSweepAndBench:
    def test_sweep_m(self, data_csv, tmp_path):
        assert main(["sweep-m", "--data", str(data_csv), "--targets", "2", "--folds", "2",
                     "--m-values", "8", "16", "32", "--out", str(tmp_path), "--figures",
                     *FAST]) == EXIT_OK
        rows = _rows(tmp_path / "sweep_m.csv")
        assert len(rows) == 3
        assert all(float(r["M_final"]) <= int(r["M_initial"]) for r in rows)
        assert (tmp_path / "sweep_m.png").exists()

    def test_bench(self, tmp_path):
        assert main(["bench", "--n-values", "30", "60", "--c-values", "1", "3", "--repeats", "1",
                     "--m", "10", "--max-iter", "2", "--out", str(tmp_path), "--figures"]) == EXIT_OK
        rows = _rows(tmp_path / "bench.csv")
        assert len(rows) == 4
        assert all(float(r["mean_seconds"]) > 0 for r in rows)
        assert (tmp_path / "bench.png").exists()


class TestVerify:
    def test_all_pass(self, capsys):
        assert main(["verify"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 6 and all(line.startswith("PASS") for line in lines)


def test_console_script():
    result = subprocess.run([sys.executable, "-m", "rffblr.cli", "--version"],
                            capture_output=True, text=True, check=True)
    assert result.stdout.startswith("rffblr ")
