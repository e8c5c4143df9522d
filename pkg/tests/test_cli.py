import csv
import io
import json
import subprocess
import sys

import pytest

from mimn.cli import main


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as e:
        code = e.code
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def dataset(tmp_path, capsys):
    path = tmp_path / "d.csv"
    code, _, _ = run(capsys, "synth", "--bags", "20,20", "--bag-size", "6", "--witness", "0.3",
                     "--dim", "5", "--seed", "1", "--out", str(path))
    assert code == 0
    return path


@pytest.fixture
def trained(tmp_path, dataset, capsys):
    model = tmp_path / "m.json"
    code, _, err = run(capsys, "train", "--data", str(dataset), "--potential", "rmimn:0.5",
                       "--map", "linear", "--lambda", "1.0", "--iters", "40", "--seed", "7",
                       "--out", str(model))
    assert code == 0, err
    return model


class TestSynth:
    def test_counts(self, tmp_path, capsys):
        path = tmp_path / "s.csv"
        code, _, _ = run(capsys, "synth", "--bags", "100,100", "--bag-size", "10", "--witness",
                         "0.3", "--dim", "20", "--seed", "1", "--out", str(path))
        assert code == 0
        rows = path.read_text().splitlines()
        assert len(rows) == 2000
        assert len({r.split(",")[0] for r in rows}) == 200
        assert len(rows[0].split(",")) == 22

    def test_same_seed_same_bytes(self, capsys):
        _, a, _ = run(capsys, "synth", "--bags", "3,3", "--seed", "4")
        _, b, _ = run(capsys, "synth", "--bags", "3,3", "--seed", "4")
        assert a == b and a

    @pytest.mark.parametrize("flags", [["--witness", "0"], ["--bag-size", "0"],
                                       ["--bags", "x"], ["--contam", "1.0"]])
    def test_invalid(self, capsys, flags):
        code, _, err = run(capsys, "synth", *flags)
        assert code == 2
        assert err


class TestTrain:
    def test_writes_model_and_logs(self, trained, capsys):
        doc = json.loads(trained.read_text())
        assert doc["potential"] == {"kind": "rmimn", "rho": 0.5}

    def test_log_to_stderr(self, tmp_path, dataset, capsys):
        code, out, err = run(capsys, "train", "--data", str(dataset), "--iters", "5",
                             "--out", str(tmp_path / "x.json"))
        assert code == 0 and out == ""
        assert "iter 0 objective 40" in err
        assert "best iteration" in err

    def test_byte_identical_rerun(self, tmp_path, dataset, trained, capsys):
        again = tmp_path / "again.json"
        code, _, _ = run(capsys, "train", "--data", str(dataset), "--potential", "rmimn:0.5",
                         "--map", "linear", "--lambda", "1.0", "--iters", "40", "--seed", "7",
                         "--out", str(again))
        assert code == 0
        assert again.read_bytes() == trained.read_bytes()

    def test_bad_rho(self, tmp_path, dataset, capsys):
        code, _, err = run(capsys, "train", "--data", str(dataset), "--potential", "rmimn:0",
                           "--out", str(tmp_path / "x.json"))
        assert code == 2
        assert "rho must be in (0,1]" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "train", "--data", str(tmp_path / "nope.csv"),
                           "--out", str(tmp_path / "x.json"))
        assert code == 3 and "cannot read" in err

    def test_bad_data(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,1,1\na,-1,2\n")
        code, _, err = run(capsys, "train", "--data", str(bad), "--out", str(tmp_path / "x.json"))
        assert code == 3 and "inconsistent bag label at line 2" in err

    def test_single_class_is_training_error(self, tmp_path, capsys):
        one = tmp_path / "one.csv"
        one.write_text("a,1,1\nb,1,2\n")
        code, _, err = run(capsys, "train", "--data", str(one), "--out", str(tmp_path / "x.json"))
        assert code == 4 and "both positive and negative" in err


class TestPredictAndEval:
    def test_columns_and_consistency(self, trained, dataset, capsys):
        code, out, _ = run(capsys, "predict", "--model", str(trained), "--data", str(dataset))
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert list(rows[0]) == ["bag_id", "predicted", "margin", "k_star"]
        truth = {line.split(",")[0]: int(line.split(",")[1])
                 for line in dataset.read_text().splitlines()}
        correct = sum(int(r["predicted"]) == truth[r["bag_id"]] for r in rows)
        for r in rows:
            margin = float(r["margin"])
            assert (margin > 0 and r["predicted"] == "1") or (margin <= 0 and r["predicted"] == "-1")
        code, out, _ = run(capsys, "eval", "--model", str(trained), "--data", str(dataset))
        assert code == 0
        assert f"({correct}/{len(rows)})" in out

    def test_dimension_mismatch(self, tmp_path, trained, capsys):
        other = tmp_path / "o.csv"
        other.write_text("a,1,1,2\nb,-1,3,4\n")
        code, _, err = run(capsys, "predict", "--model", str(trained), "--data", str(other))
        assert code == 3 and "dimension" in err

    def test_unsupported_feature_map(self, tmp_path, trained, dataset, capsys):
        doc = json.loads(trained.read_text())
        doc["feature_map"] = {"kind": "rbf", "gamma": 1.0}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        code, _, err = run(capsys, "predict", "--model", str(bad), "--data", str(dataset))
        assert code == 3 and "unsupported feature_map" in err


class TestCv:
    def test_single_potential(self, dataset, capsys):
        code, out, _ = run(capsys, "cv", "--data", str(dataset), "--potential", "mimn",
                           "--folds", "4", "--seed", "1", "--iters", "30")
        assert code == 0 and "mean accuracy" in out

    def test_grids_and_csv(self, tmp_path, dataset, capsys):
        report = tmp_path / "r.csv"
        code, out, _ = run(capsys, "cv", "--data", str(dataset), "--k-grid", "3,5",
                           "--rho-grid", "0.3", "--lambda-grid", "0.5,1", "--folds", "3",
                           "--iters", "20", "--csv", str(report))
        assert code == 0
        for name in ("gmimn:3", "gmimn:5", "rmimn:0.3"):
            assert name in out
        rows = list(csv.DictReader(io.StringIO(report.read_text())))
        assert len(rows) == 3 * 2 * 3

    def test_baseline(self, dataset, capsys):
        code, out, _ = run(capsys, "cv", "--data", str(dataset), "--baseline", "majority",
                           "--folds", "2", "--iters", "20")
        assert code == 0 and "baseline majority" in out

    def test_one_fold(self, dataset, capsys):
        code, _, _ = run(capsys, "cv", "--data", str(dataset), "--folds", "1")
        assert code == 2


class TestSelfcheck:
    def test_small_run(self, capsys):
        code, out, _ = run(capsys, "selfcheck", "--cases", "50", "--grad-cases", "5", "--seed", "3")
        assert code == 0
        assert out.strip() == "50/50 inference, 5/5 gradient"

    def test_zero_cases(self, capsys):
        code, _, _ = run(capsys, "selfcheck", "--cases", "0")
        assert code == 2

    def test_detects_off_by_one(self, capsys, monkeypatch):
        import mimn.core as core
        from mimn.core import Rmimn

        original = core.clique_table

        def broken(spec, m, y):
            feasible, index = original(spec, m, y)
            if isinstance(spec, Rmimn) and y == 1:
                feasible = feasible.copy()
                k = spec.k_min(m)
                if k - 1 >= 1:
                    feasible[k - 1] = True
            return feasible, index

        monkeypatch.setattr("mimn.inference.clique_table", broken)
        code, out, err = run(capsys, "selfcheck", "--cases", "200", "--grad-cases", "0")
        assert code == 1
        assert "FAIL inference case seed" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mimn", "synth", "--bags", "1,1", "--bag-size", "2",
                           "--dim", "2"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 4
