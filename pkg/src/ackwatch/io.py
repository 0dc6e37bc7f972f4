"""Serialization of traces and summaries.

CSV is the primary interchange format; the headers below are a stability
contract consumed by the plotting package and by spreadsheets:

* ``step_trace.csv``: k, x, x_hat_s, x_hat, x_hat_e, P, P_e, gamma,
  gamma_e, gamma_a, blocked, ack_delivered, t_ref.  Vector quantities get
  ``_i`` suffixes and matrices ``_i_j`` suffixes when the state dimension
  exceeds one.
* ``receipt_trace.csv``: m, k, age, then z_<det>/log_z_<det> per
  receiver-side detector, then moving_avg (blank until the window fills).
* ``ack_trace.csv``: n, k, age, then z_<det>/log_z_<det> per sensor-side
  detector.
* ``alarms.csv``: detector, side, threshold, alarm_receipt, alarm_time.
* ``summary.csv``: one row per (detector, threshold) with false-alarm and
  delay statistics.

Numeric fields are written with 17 significant digits so values round-trip
exactly.  The manifest echoes the fully resolved scenario and suffices to
reproduce every file byte-for-byte.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EvaluationError
from .scenario import Scenario, scenario_to_dict
from .simulator import RunTrace, SummaryStats

ENV_OUT_DIR = "ACKWATCH_OUT"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _write_table(path: Path, header: list[str], rows: list[list], fmt: str) -> Path:
    if fmt == "csv":
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    elif fmt == "json":
        path = path.with_suffix(".json")
        payload = {"columns": header, "rows": [[format_value(v) for v in row] for row in rows]}
        path.write_text(json.dumps(payload, indent=1) + "\n")
    else:
        raise EvaluationError(f"unknown output format {fmt!r}")
    return path


def _component_names(base: str, n: int) -> list[str]:
    if n == 1:
        return [base]
    return [f"{base}_{i}" for i in range(n)]


def _matrix_names(base: str, n: int) -> list[str]:
    if n == 1:
        return [base]
    return [f"{base}_{i}_{j}" for i in range(n) for j in range(n)]


@dataclass
class OutputBundle:
    """Paths of everything a command emitted."""

    out_dir: Path
    manifest: Path
    trace_files: list[Path] = field(default_factory=list)
    summary_file: Path | None = None


def _write_manifest(out_dir: Path, scenario: Scenario, mode: str, run_index: int | None) -> Path:
    manifest = {
        "tool": "ackwatch",
        "version": __version__,
        "mode": mode,
        "run_index": run_index,
        "scenario": scenario_to_dict(scenario),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def resolve_out_dir(out_dir: str | Path | None) -> Path:
    """CLI output directory: explicit flag, else the environment override,
    else the current directory."""
    if out_dir is None:
        out_dir = os.environ.get(ENV_OUT_DIR, ".")
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def emit_run_outputs(trace: RunTrace, out_dir: str | Path, fmt: str = "csv") -> OutputBundle:
    """Write the per-step, per-receipt, per-ack, and alarm tables for one run."""
    out_dir = resolve_out_dir(out_dir)
    scenario = trace.scenario
    n = scenario.system_params().n
    steps = trace.steps
    rows = steps["k"].shape[0]

    step_header = (
        ["k"]
        + _component_names("x", n)
        + _component_names("x_hat_s", n)
        + _component_names("x_hat", n)
        + _component_names("x_hat_e", n)
        + _matrix_names("P", n)
        + _matrix_names("P_e", n)
        + ["gamma", "gamma_e", "gamma_a", "blocked", "ack_delivered", "t_ref"]
    )
    step_rows = []
    for k in range(rows):
        row: list = [int(steps["k"][k])]
        for name in ("x", "x_hat_s", "x_hat", "x_hat_e"):
            row.extend(steps[name][k].tolist())
        for name in ("P", "P_e"):
            row.extend(steps[name][k].reshape(-1).tolist())
        row.extend(
            [
                steps["gamma"][k],
                steps["gamma_e"][k],
                steps["gamma_a"][k],
                steps["blocked"][k],
                steps["ack_delivered"][k],
                int(steps["t_ref"][k]),
            ]
        )
        step_rows.append(row)

    receiver_dets = [d for d in scenario.detectors if d.side == "receiver"]
    sensor_dets = [d for d in scenario.detectors if d.side == "sensor"]
    window = scenario.moving_average_window

    receipt_header = ["m", "k", "age"]
    for det in receiver_dets:
        receipt_header += [f"z_{det.name}", f"log_z_{det.name}"]
    receipt_header.append("moving_avg")
    receipt_rows = []
    for i in range(trace.events.receipt_times.size):
        row = [i + 1, int(trace.events.receipt_times[i]), int(trace.events.receipt_ages[i])]
        for det in receiver_dets:
            run = trace.detectors[det.name]
            row += [float(run.z[i]), float(run.log_z[i])]
        ma_index = i + 1 - window
        row.append(float(trace.moving_average[ma_index]) if ma_index >= 0 else None)
        receipt_rows.append(row)

    ack_header = ["n", "k", "age"]
    for det in sensor_dets:
        ack_header += [f"z_{det.name}", f"log_z_{det.name}"]
    ack_rows = []
    for i in range(trace.events.ack_times.size):
        row = [i + 1, int(trace.events.ack_times[i]), int(trace.events.ack_ages[i])]
        for det in sensor_dets:
            run = trace.detectors[det.name]
            row += [float(run.z[i]), float(run.log_z[i])]
        ack_rows.append(row)

    alarm_header = ["detector", "side", "threshold", "alarm_receipt", "alarm_time"]
    alarm_rows = []
    for det in scenario.detectors:
        run = trace.detectors[det.name]
        for threshold in det.thresholds:
            alarm = run.alarms[threshold]
            alarm_rows.append(
                [
                    det.name,
                    det.side,
                    threshold,
                    alarm.receipt_index if alarm else None,
                    alarm.time if alarm else None,
                ]
            )

    bundle = OutputBundle(
        out_dir=out_dir,
        manifest=_write_manifest(out_dir, scenario, "run", trace.run_index),
    )
    bundle.trace_files.append(_write_table(out_dir / "step_trace.csv", step_header, step_rows, fmt))
    bundle.trace_files.append(
        _write_table(out_dir / "receipt_trace.csv", receipt_header, receipt_rows, fmt)
    )
    bundle.trace_files.append(_write_table(out_dir / "ack_trace.csv", ack_header, ack_rows, fmt))
    bundle.trace_files.append(_write_table(out_dir / "alarms.csv", alarm_header, alarm_rows, fmt))
    return bundle


def _alarm_row_str(value) -> str:
    return "" if value is None else str(value)


def emit_mc_outputs(stats: SummaryStats, out_dir: str | Path, fmt: str = "csv") -> OutputBundle:
    """Write the Monte Carlo summary, one row per (detector, threshold)."""
    out_dir = resolve_out_dir(out_dir)
    header = [
        "detector",
        "side",
        "threshold",
        "runs",
        "pfa",
        "pfa_half_width",
        "mean_delay_receipts",
        "delay_receipts_half_width",
        "mean_delay_steps",
        "delay_steps_half_width",
        "detected_runs",
        "censored_runs",
        "bayes_risk",
    ]
    rows = [
        [
            row.detector,
            row.side,
            row.threshold,
            row.runs,
            row.pfa,
            row.pfa_half_width,
            row.mean_delay_receipts,
            row.delay_receipts_half_width,
            row.mean_delay_steps,
            row.delay_steps_half_width,
            row.detected_runs,
            row.censored_runs,
            row.bayes_risk,
        ]
        for row in stats.rows
    ]
    bundle = OutputBundle(
        out_dir=out_dir, manifest=_write_manifest(out_dir, stats.scenario, "mc", None)
    )
    bundle.summary_file = _write_table(out_dir / "summary.csv", header, rows, fmt)
    return bundle


def emit_calibration(rows, out_dir: str | Path, scenario: Scenario, fmt: str = "csv") -> OutputBundle:
    out_dir = resolve_out_dir(out_dir)
    header = ["detector", "threshold", "pfa", "mean_delay_steps"]
    table = [[r.detector, r.threshold, r.pfa, r.mean_delay_steps] for r in rows]
    bundle = OutputBundle(
        out_dir=out_dir, manifest=_write_manifest(out_dir, scenario, "calibrate", None)
    )
    bundle.summary_file = _write_table(out_dir / "calibration.csv", header, table, fmt)
    return bundle


def emit_figures_data(trace: RunTrace, out_dir: str | Path) -> OutputBundle:
    """Emit exactly the series behind the four figure analogues plus an
    annotations file with the markers (activation, thresholds, theoretical
    mean ages)."""
    out_dir = resolve_out_dir(out_dir)
    scenario = trace.scenario
    events = trace.events
    channels = scenario.channels
    window = scenario.moving_average_window

    receiver_dets = [d for d in scenario.detectors if d.side == "receiver"]
    sensor_dets = [d for d in scenario.detectors if d.side == "sensor"]
    if not receiver_dets or not sensor_dets:
        raise EvaluationError("figures data needs at least one receiver and one sensor detector")
    primary = next((d for d in receiver_dets if d.name == "exact"), receiver_dets[0])
    combined_rx = next((d for d in receiver_dets if d.name == "misspec"), receiver_dets[-1])
    combined_tx = sensor_dets[0]

    bundle = OutputBundle(
        out_dir=out_dir, manifest=_write_manifest(out_dir, scenario, "figures-data", trace.run_index)
    )

    age_rows = [
        [i + 1, int(events.receipt_times[i]), int(events.receipt_ages[i])]
        for i in range(events.receipt_times.size)
    ]
    bundle.trace_files.append(
        _write_table(out_dir / "age_series.csv", ["m", "k", "age"], age_rows, "csv")
    )

    ma_rows = [
        [window + i, int(events.receipt_times[window + i - 1]), float(trace.moving_average[i])]
        for i in range(trace.moving_average.shape[0])
    ]
    bundle.trace_files.append(
        _write_table(out_dir / "moving_average.csv", ["m", "k", "mean_age"], ma_rows, "csv")
    )

    primary_run = trace.detectors[primary.name]
    posterior_rows = [
        [i + 1, int(events.receipt_times[i]), float(primary_run.z[i]), float(primary_run.log_z[i])]
        for i in range(events.receipt_times.size)
    ]
    bundle.trace_files.append(
        _write_table(
            out_dir / "posterior_receiver.csv", ["m", "k", "z", "log_z"], posterior_rows, "csv"
        )
    )

    combined_rows = []
    rx_run = trace.detectors[combined_rx.name]
    for i in range(events.receipt_times.size):
        combined_rows.append(
            ["receiver", i + 1, int(events.receipt_times[i]), float(rx_run.z[i]), float(rx_run.log_z[i])]
        )
    tx_run = trace.detectors[combined_tx.name]
    for i in range(events.ack_times.size):
        combined_rows.append(
            ["sensor", i + 1, int(events.ack_times[i]), float(tx_run.z[i]), float(tx_run.log_z[i])]
        )
    bundle.trace_files.append(
        _write_table(
            out_dir / "posterior_combined.csv",
            ["side", "index", "k", "z", "log_z"],
            combined_rows,
            "csv",
        )
    )

    annotations = {
        "activation_step": events.activation_step,
        "activation_receipt": events.activation_receipt,
        "activation_ack": events.activation_ack,
        "moving_average_window": window,
        "mean_age_pre": 1.0 / (channels.alpha * channels.alpha_a),
        "mean_age_post": 1.0 / (channels.alpha * channels.alpha_a * channels.alpha_e),
        "posterior_receiver_detector": primary.name,
        "posterior_receiver_threshold": primary.thresholds[0],
        "combined_receiver_detector": combined_rx.name,
        "combined_sensor_detector": combined_tx.name,
        "combined_threshold": combined_rx.thresholds[0],
        "horizon": scenario.horizon,
    }
    annotations_path = out_dir / "annotations.json"
    annotations_path.write_text(json.dumps(annotations, indent=1, sort_keys=True) + "\n")
    bundle.trace_files.append(annotations_path)
    return bundle
