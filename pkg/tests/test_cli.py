"""CLI behavior and output serialization contracts."""

import csv
import json
import subprocess
import sys

import pytest

from ackwatch.cli import main
from ackwatch.io import format_value
from ackwatch.scenario import default_scenario, scenario_to_dict


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def write_scenario(tmp_path, overrides, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(overrides))
    return str(path)


SMALL = {"horizon": 400, "mc_runs": 8}


class TestFloatFormatting:
    def test_seventeen_digit_round_trip(self):
        for value in (0.1, 1.0 / 3.0, 1.5873015873015872, 5e-324, -1.001):
            assert float(format_value(value)) == value

    def test_bool_and_none(self):
        assert format_value(True) == "1"
        assert format_value(False) == "0"
        assert format_value(None) == ""


class TestRunCommand:
    def test_run_emits_expected_files(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["run", "--scenario", scenario, "--out", str(out)]) == 0
        for name in ("step_trace.csv", "receipt_trace.csv", "ack_trace.csv", "alarms.csv", "manifest.json"):
            assert (out / name).exists()
        header = read_csv(out / "step_trace.csv")[0]
        assert header == [
            "k", "x", "x_hat_s", "x_hat", "x_hat_e", "P", "P_e",
            "gamma", "gamma_e", "gamma_a", "blocked", "ack_delivered", "t_ref",
        ]
        receipt_header = read_csv(out / "receipt_trace.csv")[0]
        assert receipt_header[:3] == ["m", "k", "age"]
        assert "z_exact" in receipt_header and "moving_avg" in receipt_header

    def test_reproducible_byte_identical(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--scenario", scenario, "--out", str(out_a)]) == 0
        assert main(["run", "--scenario", scenario, "--out", str(out_b)]) == 0
        for name in ("step_trace.csv", "receipt_trace.csv", "ack_trace.csv", "alarms.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_manifest_reproduces_run(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--scenario", scenario, "--out", str(out_a)]) == 0
        assert main(["run", "--scenario", str(out_a / "manifest.json"), "--out", str(out_b)]) == 0
        assert (out_a / "step_trace.csv").read_bytes() == (out_b / "step_trace.csv").read_bytes()

    def test_manifest_replays_run_index(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--scenario", scenario, "--out", str(out_a), "--run-index", "3"]) == 0
        assert main(["run", "--scenario", str(out_a / "manifest.json"), "--out", str(out_b)]) == 0
        assert (out_a / "step_trace.csv").read_bytes() == (out_b / "step_trace.csv").read_bytes()

    def test_detector_filter(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["run", "--scenario", scenario, "--out", str(out), "--detector", "exact"]) == 0
        header = read_csv(out / "receipt_trace.csv")[0]
        assert "z_exact" in header and "z_misspec" not in header

    def test_attacker_override(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["run", "--scenario", scenario, "--out", str(out), "--attacker", "passive"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["scenario"]["attacker"]["kind"] == "passive"

    def test_json_format(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["run", "--scenario", scenario, "--out", str(out), "--format", "json"]) == 0
        payload = json.loads((out / "step_trace.json").read_text())
        assert payload["columns"][0] == "k"

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        scenario = write_scenario(tmp_path, SMALL)
        target = tmp_path / "envout"
        monkeypatch.setenv("ACKWATCH_OUT", str(target))
        assert main(["run", "--scenario", scenario]) == 0
        assert (target / "manifest.json").exists()


class TestExitCodes:
    def test_validation_error_is_two(self, tmp_path):
        bad = write_scenario(tmp_path, {"channels": {"alpha": 1.5}})
        assert main(["run", "--scenario", bad, "--out", str(tmp_path / "x")]) == 2

    def test_missing_scenario_file_is_two(self, tmp_path):
        assert main(["run", "--scenario", str(tmp_path / "nope.json")]) == 2

    def test_unknown_detector_name_is_two(self, tmp_path):
        scenario = write_scenario(tmp_path, {**SMALL, "detectors": [
            {"name": "only", "thresholds": [0.9]}]})
        assert main(["run", "--scenario", scenario, "--out", str(tmp_path / "x"),
                     "--detector", "exact"]) == 2

    def test_io_failure_is_three(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        clobber = tmp_path / "file"
        clobber.write_text("occupied")
        assert main(["run", "--scenario", scenario, "--out", str(clobber)]) == 3


class TestMcCommand:
    def test_summary_rows(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["mc", "--scenario", scenario, "--out", str(out), "--runs", "6"]) == 0
        rows = read_csv(out / "summary.csv")
        assert rows[0][:4] == ["detector", "side", "threshold", "runs"]
        assert len(rows) == 1 + 3  # header + one row per (detector, threshold)
        assert all(row[3] == "6" for row in rows[1:])

    def test_seed_override_changes_output(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["mc", "--scenario", scenario, "--out", str(out_a), "--runs", "6"])
        main(["mc", "--scenario", scenario, "--out", str(out_b), "--runs", "6", "--seed", "1"])
        assert (out_a / "summary.csv").read_text() != (out_b / "summary.csv").read_text()


class TestCalibrateCommand:
    def test_calibration_table(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main([
            "calibrate", "--scenario", scenario, "--out", str(out),
            "--runs", "6", "--h-count", "5",
        ]) == 0
        rows = read_csv(out / "calibration.csv")
        assert rows[0] == ["detector", "threshold", "pfa", "mean_delay_steps"]
        assert len(rows) == 1 + 3 * 5

    def test_bad_grid_is_validation_error(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        assert main([
            "calibrate", "--scenario", scenario, "--out", str(tmp_path / "x"),
            "--h-min", "0.9", "--h-max", "0.5",
        ]) == 2


class TestFiguresData:
    def test_emits_figure_series(self, tmp_path):
        scenario = write_scenario(tmp_path, {"horizon": 1200})
        out = tmp_path / "out"
        assert main(["figures-data", "--scenario", scenario, "--out", str(out)]) == 0
        for name in (
            "age_series.csv",
            "moving_average.csv",
            "posterior_receiver.csv",
            "posterior_combined.csv",
            "annotations.json",
        ):
            assert (out / name).exists()
        notes = json.loads((out / "annotations.json").read_text())
        assert notes["activation_step"] == 900
        assert notes["mean_age_pre"] == pytest.approx(1.5873, abs=5e-5)
        combined = read_csv(out / "posterior_combined.csv")
        sides = {row[0] for row in combined[1:]}
        assert sides == {"receiver", "sensor"}


class TestConsoleEntry:
    def test_module_invocation(self, tmp_path):
        scenario = write_scenario(tmp_path, SMALL)
        out = tmp_path / "out"
        result = subprocess.run(
            [sys.executable, "-m", "ackwatch", "run", "--scenario", scenario, "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        assert (out / "manifest.json").exists()

    def test_version_flag(self):
        result = subprocess.run(
            [sys.executable, "-m", "ackwatch", "--version"], capture_output=True, text=True
        )
        assert result.returncode == 0
        assert "ackwatch" in result.stdout
