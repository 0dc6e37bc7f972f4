"""Command-line front end.

Subcommands:

* ``run``: simulate a single trace and write the per-step / per-receipt /
  per-ack / alarm tables.
* ``mc``: Monte Carlo sweep; writes ``summary.csv``.
* ``calibrate``: threshold-to-false-alarm sweep; writes ``calibration.csv``.
* ``figures-data``: emit exactly the series behind the four figure
  analogues from a single run.

Exit codes: 0 success, 2 validation or configuration error, 3 runtime
failure.  The output directory defaults to the ACKWATCH_OUT environment
variable, then the current directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .errors import AckwatchError, ConfigurationError, ValidationError
from .io import (
    emit_calibration,
    emit_figures_data,
    emit_mc_outputs,
    emit_run_outputs,
    resolve_out_dir,
)
from .scenario import PAPER_DEFAULTS, Scenario, default_scenario, parse_scenario
from .simulator import calibrate_thresholds, run_monte_carlo, run_once

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

DETECTOR_CHOICES = ("exact", "misspec", "sensor", "moving-average", "all")
ATTACKER_CHOICES = ("passive", "selective", "block-all")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help="scenario or manifest JSON file (defaults omitted fields)")
    parser.add_argument("--out", help="output directory (default: $ACKWATCH_OUT or '.')")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--runs", type=int, help="override the scenario Monte Carlo run count")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    parser.add_argument(
        "--detector",
        choices=DETECTOR_CHOICES,
        default="all",
        help="restrict which detectors are evaluated",
    )
    parser.add_argument(
        "--attacker", choices=ATTACKER_CHOICES, help="override the scenario attacker kind"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ackwatch",
        description="Remote estimation with secrecy coding and acknowledgment-intruder detection",
    )
    parser.add_argument("--version", action="version", version=f"ackwatch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one trace")
    _add_common(run)
    run.add_argument(
        "--run-index",
        type=int,
        default=None,
        help="substream index of the run (default: the manifest's index, else 0)",
    )

    mc = sub.add_parser("mc", help="Monte Carlo summary over independent runs")
    _add_common(mc)

    cal = sub.add_parser("calibrate", help="sweep thresholds against empirical false-alarm rate")
    _add_common(cal)
    cal.add_argument("--h-min", type=float, default=0.95)
    cal.add_argument("--h-max", type=float, default=0.9995)
    cal.add_argument("--h-count", type=int, default=25)

    fig = sub.add_parser("figures-data", help="emit the figure series from one run")
    _add_common(fig)
    fig.add_argument(
        "--run-index",
        type=int,
        default=None,
        help="substream index of the run (default: the manifest's index, else 0)",
    )
    return parser


def _load_scenario(args: argparse.Namespace) -> Scenario:
    scenario = parse_scenario(args.scenario) if args.scenario else default_scenario()
    changes: dict = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["mc_runs"] = args.runs
    if changes:
        scenario = dataclasses.replace(scenario, **changes)

    if args.attacker is not None:
        kind = args.attacker.replace("-", "_")
        attacker = scenario.attacker
        if kind == "passive":
            attacker = dataclasses.replace(
                attacker,
                kind="passive",
                activation_time=None,
                activation_receipt=None,
                activation_rho=None,
            )
        else:
            has_mode = any(
                v is not None
                for v in (attacker.activation_time, attacker.activation_receipt, attacker.activation_rho)
            )
            if not has_mode:
                attacker = dataclasses.replace(
                    attacker,
                    activation_time=PAPER_DEFAULTS["attacker"]["activation_time"],
                    perfect_sync_until_activation=True,
                )
            attacker = dataclasses.replace(attacker, kind=kind)
        scenario = dataclasses.replace(scenario, attacker=attacker)

    if args.detector != "all":
        if args.detector == "moving-average":
            detectors = []
        else:
            detectors = [d for d in scenario.detectors if d.name == args.detector]
            if not detectors:
                raise ValidationError(
                    f"scenario defines no detector named {args.detector!r}"
                )
        scenario = dataclasses.replace(scenario, detectors=detectors)
    return scenario.validate()


def _resolve_run_index(args: argparse.Namespace) -> int:
    """Explicit flag wins; a replayed manifest supplies its own run index."""
    if args.run_index is not None:
        return args.run_index
    if args.scenario:
        try:
            with open(args.scenario) as handle:
                raw = json.load(handle)
        except (OSError, json.JSONDecodeError):
            return 0
        if isinstance(raw, dict) and isinstance(raw.get("run_index"), int):
            return raw["run_index"]
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    trace = run_once(scenario, run_index=_resolve_run_index(args))
    bundle = emit_run_outputs(trace, resolve_out_dir(args.out), fmt=args.format)
    print(f"wrote {len(bundle.trace_files)} trace files to {bundle.out_dir}")
    return EXIT_OK


def _cmd_mc(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    stats = run_monte_carlo(scenario)
    bundle = emit_mc_outputs(stats, resolve_out_dir(args.out), fmt=args.format)
    for row in stats.rows:
        print(
            f"{row.detector}[h={row.threshold:g}] pfa={row.pfa:.3f} "
            f"delay={row.mean_delay_steps:.1f} steps / {row.mean_delay_receipts:.1f} receipts "
            f"risk={row.bayes_risk:.4f}"
        )
    print(f"wrote {bundle.summary_file}")
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    if not scenario.detectors:
        raise ValidationError("calibration needs at least one posterior detector")
    if not (0.0 < args.h_min < args.h_max < 1.0):
        raise ValidationError("need 0 < h-min < h-max < 1")
    grid = np.linspace(args.h_min, args.h_max, args.h_count)
    rows = calibrate_thresholds(scenario, grid)
    bundle = emit_calibration(rows, resolve_out_dir(args.out), scenario, fmt=args.format)
    print(f"wrote {bundle.summary_file}")
    return EXIT_OK


def _cmd_figures_data(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    trace = run_once(scenario, run_index=_resolve_run_index(args))
    bundle = emit_figures_data(trace, resolve_out_dir(args.out))
    print(f"wrote {len(bundle.trace_files)} figure-data files to {bundle.out_dir}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "mc": _cmd_mc,
    "calibrate": _cmd_calibrate,
    "figures-data": _cmd_figures_data,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ConfigurationError) as exc:
        print(f"ackwatch: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AckwatchError as exc:
        print(f"ackwatch: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"ackwatch: i/o failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
