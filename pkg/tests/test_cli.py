import csv
import json
import random

import pytest

from warnrdd.cli import main

CUTOFF_SPEC = {"n": 1200, "seed": 5, "noise_sd": 2.0, "compliance": [0.9, 0.1]}


@pytest.fixture
def course_files(tmp_path):
    """A tiny but complete course: submissions, online tests, exams."""
    subs = tmp_path / "submissions.csv"
    with open(subs, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["student_id", "exercise_id", "points", "timestamp"])
        writer.writerow(["s01", "ex1", 80, "2019-05-02T10:00"])
        writer.writerow(["s01", "ex1", 90, "2019-05-03T10:00"])
        writer.writerow(["s01", "ex2", 70, "2019-05-10T09:30"])
        writer.writerow(["s02", "ex1", 40, "2019-05-04T11:00"])

    tests = tmp_path / "tests.csv"
    with open(tests, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["student_id", "test_index", "points"])
        for sid, idx, points in [
            ("s01", 1, 300), ("s01", 2, 250), ("s02", 1, 120), ("s03", 1, 50),
        ]:
            writer.writerow([sid, idx, points])

    exams = tmp_path / "exams.csv"
    with open(exams, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["student_id", "attempt", "points", "passed"])
        writer.writerow(["s01", 1, 48, 1])
        writer.writerow(["s02", 1, 20, 0])
        writer.writerow(["s02", 2, 31, 1])
    return subs, tests, exams


def simulate(tmp_path, spec=CUTOFF_SPEC, out="sim"):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out_dir = tmp_path / out
    code = main(["simulate", "--spec", str(spec_path), "--out", str(out_dir)])
    assert code == 0
    return out_dir


class TestFeatures:
    def test_writes_features_and_descriptives(self, course_files, tmp_path):
        subs, tests, exams = course_files
        out = tmp_path / "out"
        code = main([
            "features", "--submissions", str(subs), "--tests", str(tests),
            "--exams", str(exams), "--score-date", "2019-05-05", "--out", str(out),
        ])
        assert code == 0
        rows = {r["student_id"]: r for r in csv.DictReader(open(out / "features.csv"))}
        assert set(rows) == {"s01", "s02", "s03"}
        assert float(rows["s01"]["score_2019-05-05"]) == 90.0
        assert rows["s01"]["grade"] == "2"  # best attempt 48 -> grade 2
        assert rows["s02"]["grade"] == "4"  # passed with 31 points
        assert rows["s03"]["attended"] == "0" and rows["s03"]["grade"] == "6"
        text = (out / "descriptives.txt").read_text()
        assert "students in course: 3" in text
        assert "Grade distribution" in text

    def test_missing_input_is_exit_2(self, tmp_path):
        assert main(["features", "--out", str(tmp_path / "x")]) == 2

    def test_bad_csv_is_exit_2(self, course_files, tmp_path):
        subs, tests, exams = course_files
        bad = tmp_path / "bad.csv"
        bad.write_text("student_id,exercise_id,points,timestamp\na,e,500,2019-05-02T10:00\n")
        code = main([
            "features", "--submissions", str(bad), "--tests", str(tests),
            "--exams", str(exams), "--out", str(tmp_path / "y"),
        ])
        assert code == 2


def write_training_features(path, n=80, seed=0):
    rng = random.Random(seed)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["student_id", "test_1", "test_2", "test_3", "test_4", "passed", "attended"])
        for i in range(n):
            ability = rng.uniform(0, 1)
            scores = [max(0.0, min(400.0, 400 * ability + rng.gauss(0, 80))) for _ in range(4)]
            passed = int(rng.random() < ability)
            writer.writerow([f"t{i:03d}"] + [f"{s:.1f}" for s in scores] + [passed, 1])


class TestPredictAssign:
    def test_train_and_predict(self, tmp_path):
        train = tmp_path / "train.csv"
        write_training_features(train)
        current = tmp_path / "current.csv"
        write_training_features(current, n=30, seed=1)
        out = tmp_path / "out"
        code = main([
            "predict", "--train", str(train), "--features", str(current), "--out", str(out),
        ])
        assert code == 0
        model = json.loads((out / "model.json").read_text())
        assert model["feature_names"] == ["test_1", "test_2", "test_3", "test_4"]
        predictions = list(csv.DictReader(open(out / "predictions.csv")))
        assert len(predictions) == 30
        assert all(0.0 < float(r["W"]) < 1.0 for r in predictions)

    def test_saved_model_reused_bit_exact(self, tmp_path):
        train = tmp_path / "train.csv"
        write_training_features(train)
        current = tmp_path / "current.csv"
        write_training_features(current, n=30, seed=1)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["predict", "--train", str(train), "--features", str(current), "--out", str(out1)])
        main(["predict", "--model", str(out1 / "model.json"), "--features", str(current),
              "--out", str(out2)])
        assert (out1 / "predictions.csv").read_bytes() == (out2 / "predictions.csv").read_bytes()

    def test_predict_without_source_is_exit_2(self, tmp_path):
        assert main(["predict", "--features", "x.csv", "--out", str(tmp_path)]) == 2

    def test_assign_with_overrides(self, tmp_path):
        predictions = tmp_path / "predictions.csv"
        predictions.write_text("student_id,W\na,0.2\nb,0.4\nc,0.6\n")
        overrides = tmp_path / "overrides.csv"
        overrides.write_text("student_id,forced_treatment,reason\nc,1,tutor request\n")
        out = tmp_path / "out"
        code = main([
            "assign", "--predictions", str(predictions), "--overrides", str(overrides),
            "--out", str(out),
        ])
        assert code == 0
        roster = {r["student_id"]: r for r in csv.DictReader(open(out / "roster.csv"))}
        assert roster["a"]["Z"] == "1" and roster["a"]["T"] == "1"
        assert roster["b"]["Z"] == "1"  # inclusive cutoff
        assert roster["c"]["Z"] == "0" and roster["c"]["T"] == "1"
        assert roster["c"]["reason"] == "tutor request"


class TestSimulateAnalyze:
    def test_simulate_outputs(self, tmp_path):
        out = simulate(tmp_path)
        assert (out / "analysis.csv").exists()
        truth = json.loads((out / "truth.json").read_text())
        assert truth["true_late"] == 5.0
        assert truth["seed"] == 5

    def test_seed_flag_overrides_spec(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(CUTOFF_SPEC))
        out = tmp_path / "o"
        main(["simulate", "--spec", str(spec_path), "--seed", "99", "--out", str(out)])
        assert json.loads((out / "truth.json").read_text())["seed"] == 99

    def test_analyze_full_outputs(self, tmp_path):
        sim = simulate(tmp_path)
        out = tmp_path / "analysis"
        code = main([
            "analyze", "--analysis", str(sim / "analysis.csv"),
            "--bandwidth", "0.255", "--out", str(out),
        ])
        assert code == 0
        for name in ("report.txt", "rdd_bins.csv", "mccrary.csv", "rdd_plot.png", "mccrary_plot.png"):
            assert (out / name).exists(), name
        text = (out / "report.txt").read_text()
        assert "Fuzzy RDD estimates (with covariates)" in text
        assert "Fuzzy RDD estimates (without covariates)" in text
        assert "Density discontinuity" in text
        for label in ("LATE", "Half-BW", "Double-BW"):
            assert label in text
        assert "0.1275" in text and "0.51" in text

    def test_analyze_no_figures(self, tmp_path):
        sim = simulate(tmp_path)
        out = tmp_path / "nofig"
        code = main([
            "analyze", "--analysis", str(sim / "analysis.csv"),
            "--bandwidth", "0.255", "--no-figures", "--out", str(out),
        ])
        assert code == 0
        assert not (out / "rdd_plot.png").exists()
        assert (out / "report.txt").exists()

    def test_analyze_auto_bandwidth_reports_selection(self, tmp_path):
        sim = simulate(tmp_path)
        out = tmp_path / "auto"
        code = main([
            "analyze", "--analysis", str(sim / "analysis.csv"), "--out", str(out), "--no-figures",
        ])
        assert code == 0
        assert "Bandwidth selection" in (out / "report.txt").read_text()

    def test_analyze_missing_inputs_is_exit_2(self, tmp_path):
        assert main(["analyze", "--out", str(tmp_path / "x")]) == 2

    def test_analyze_empty_window_is_exit_3(self, tmp_path):
        sim = simulate(tmp_path)
        out = tmp_path / "narrow"
        code = main([
            "analyze", "--analysis", str(sim / "analysis.csv"),
            "--bandwidth", "1e-15", "--out", str(out), "--no-figures",
        ])
        assert code == 3

    def test_config_file_with_flag_override(self, tmp_path):
        sim = simulate(tmp_path)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "analysis": str(sim / "analysis.csv"),
            "bandwidth": 0.2,
            "no_figures": True,
            "multipliers": "1.0",
        }))
        out = tmp_path / "cfg"
        code = main(["analyze", "--config", str(config), "--bandwidth", "0.3", "--out", str(out)])
        assert code == 0
        # explicit flag wins over the config value
        assert "0.3" in (out / "report.txt").read_text()

    def test_bad_config_is_exit_2(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("not json")
        assert main(["analyze", "--config", str(config)]) == 2


class TestMccraryAndBandwidth:
    def test_mccrary_outputs(self, tmp_path, capsys):
        sim = simulate(tmp_path)
        out = tmp_path / "mc"
        code = main([
            "mccrary", "--analysis", str(sim / "analysis.csv"), "--out", str(out),
        ])
        assert code == 0
        assert (out / "mccrary.csv").exists()
        assert (out / "mccrary_plot.png").exists()
        captured = capsys.readouterr()
        assert "log density difference" in captured.out
        rows = list(csv.DictReader(open(out / "mccrary.csv")))
        assert {r["side"] for r in rows} == {"left", "right"}

    def test_bandwidth_prints_diagnostics(self, tmp_path, capsys):
        sim = simulate(tmp_path)
        code = main(["bandwidth", "--analysis", str(sim / "analysis.csv")])
        assert code == 0
        assert "selected bandwidth" in capsys.readouterr().out

    def test_threads_flag_accepted(self, tmp_path):
        sim = simulate(tmp_path)
        code = main([
            "bandwidth", "--analysis", str(sim / "analysis.csv"), "--threads", "4",
        ])
        assert code == 0


class TestEndToEndPipeline:
    def test_features_to_analysis_via_roster(self, tmp_path):
        """Full pipeline on generated course data: features -> predict -> assign -> analyze."""
        rng = random.Random(2)
        exams = tmp_path / "exams.csv"
        tests = tmp_path / "tests.csv"
        subs = tmp_path / "subs.csv"
        with open(subs, "w", newline="") as handle:
            csv.writer(handle).writerow(["student_id", "exercise_id", "points", "timestamp"])
        with open(tests, "w", newline="") as t_handle, open(exams, "w", newline="") as e_handle:
            t_writer = csv.writer(t_handle)
            e_writer = csv.writer(e_handle)
            t_writer.writerow(["student_id", "test_index", "points"])
            e_writer.writerow(["student_id", "attempt", "points", "passed"])
            for i in range(300):
                sid = f"s{i:03d}"
                ability = rng.uniform(0, 1)
                for idx in range(1, 5):
                    t_writer.writerow([sid, idx, f"{max(0, min(400, 400 * ability + rng.gauss(0, 60))):.1f}"])
                points = max(0.0, min(60.0, 60 * ability + rng.gauss(0, 8)))
                e_writer.writerow([sid, 1, f"{points:.1f}", int(points >= 30)])
        out = tmp_path / "p"
        assert main(["features", "--submissions", str(subs), "--tests", str(tests),
                     "--exams", str(exams), "--out", str(out)]) == 0
        assert main(["predict", "--train", str(out / "features.csv"),
                     "--features", str(out / "features.csv"), "--out", str(out)]) == 0
        assert main(["assign", "--predictions", str(out / "predictions.csv"),
                     "--out", str(out)]) == 0
        code = main(["analyze", "--features", str(out / "features.csv"),
                     "--roster", str(out / "roster.csv"), "--bandwidth", "0.3",
                     "--out", str(out), "--no-figures"])
        assert code == 0
        text = (out / "report.txt").read_text()
        # full compliance: the sharp cross-check note must appear
        assert "fuzzy and sharp estimates agree" in text
