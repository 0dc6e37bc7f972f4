"""Scenario configuration: validated parameters for a simulation study.

A scenario is plain data (floats, ints, nested lists) so it serializes to
JSON losslessly and round-trips through the manifest byte-for-byte.  Heavy
objects (`SystemParams`, `ChannelParams`, detector models) are built on
demand from it.

`default_scenario` is the reference study: scalar system A=1.001, C=1,
Q=0.001, R=0.1 started from x0=0.1, channels alpha=0.7, alpha_a=0.9, a
perfect eavesdropper that degrades to alpha_e=0.8 at process time 900 and
then selectively blocks acknowledgments, horizon 2000 steps, and three
posterior detectors (exact receiver model at h=0.9875; mis-specified
receiver and sensor models built from an assumed channel bound 0.98 at
h=0.9865) plus a 150-receipt moving-average baseline.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .network import AttackerPolicy, ChannelParams
from .process_model import SystemParams
from .qcd import GeometricModel

ATTACKER_KINDS = ("passive", "selective", "block_all")
DETECTOR_SIDES = ("receiver", "sensor")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def _matrix_field(value, name: str) -> list[list[float]]:
    """Normalize a scalar or nested list into a canonical matrix-of-floats."""
    if isinstance(value, (int, float)):
        return [[float(value)]]
    try:
        mat = [[float(x) for x in row] for row in value]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"system.{name} must be a number or a nested list of numbers") from exc
    _require(len(mat) > 0 and all(len(row) == len(mat[0]) for row in mat), f"system.{name} rows must have equal length")
    return mat


@dataclass
class SystemConfig:
    a: list[list[float]]
    c: list[list[float]]
    q: list[list[float]]
    r: list[list[float]]
    sigma0: list[list[float]]

    def build(self) -> SystemParams:
        return SystemParams(A=self.a, C=self.c, Q=self.q, R=self.r, Sigma0=self.sigma0)


@dataclass
class ChannelConfig:
    alpha: float
    alpha_a: float
    alpha_e: float

    def build(self) -> ChannelParams:
        return ChannelParams(alpha=self.alpha, alpha_a=self.alpha_a, alpha_e=self.alpha_e)


@dataclass
class AttackerConfig:
    """Attacker kind plus exactly one activation mode.

    ``activation_time`` activates at a process step, ``activation_receipt``
    at a legitimate packet-receipt index, ``activation_rho`` draws the
    receipt index from a geometric law per run.  With
    ``perfect_sync_until_activation`` the eavesdropper's channel is forced
    perfect before activation (it has been in sync the whole time), after
    which alpha_e applies.
    """

    kind: str
    activation_time: int | None = None
    activation_receipt: int | None = None
    activation_rho: float | None = None
    perfect_sync_until_activation: bool = False

    def validate(self) -> None:
        _require(self.kind in ATTACKER_KINDS, f"attacker.kind must be one of {ATTACKER_KINDS}")
        modes = [
            self.activation_time is not None,
            self.activation_receipt is not None,
            self.activation_rho is not None,
        ]
        if self.kind == "passive":
            _require(sum(modes) == 0, "a passive attacker takes no activation mode")
        else:
            _require(sum(modes) == 1, "set exactly one of activation_time / activation_receipt / activation_rho")
        if self.activation_time is not None:
            _require(self.activation_time >= 1, "attacker.activation_time must be >= 1")
        if self.activation_receipt is not None:
            _require(self.activation_receipt >= 1, "attacker.activation_receipt must be >= 1")
        if self.activation_rho is not None:
            _require(0.0 < self.activation_rho < 1.0, "attacker.activation_rho must be in (0, 1)")

    def policy_for(self, activation_receipt: int | None) -> AttackerPolicy:
        """Concrete per-run policy once the activation receipt is realized."""
        if self.kind == "passive":
            return AttackerPolicy(kind="passive", activation_receipt=None)
        return AttackerPolicy(kind=self.kind, activation_receipt=activation_receipt)


@dataclass
class DetectorConfig:
    """One posterior detector: a geometric model attached to an event stream
    (receiver receipts or sensor ack receipts) and the thresholds to score."""

    name: str
    side: str
    rho1: float
    rho2: float
    rho_i: float
    thresholds: list[float]

    def validate(self) -> None:
        _require(self.side in DETECTOR_SIDES, f"detector.side must be one of {DETECTOR_SIDES}")
        _require(len(self.thresholds) >= 1, f"detector {self.name!r} needs at least one threshold")
        for h in self.thresholds:
            _require(0.0 < h < 1.0, f"detector {self.name!r} threshold {h} must be in (0, 1)")
        # Model construction re-checks the parameter ranges.
        try:
            self.model()
        except Exception as exc:
            raise ValidationError(f"detector {self.name!r}: {exc}") from exc

    def model(self) -> GeometricModel:
        return GeometricModel(rho1=self.rho1, rho2=self.rho2, rho_i=self.rho_i)


@dataclass
class Scenario:
    """Complete, resolved description of one simulation study."""

    system: SystemConfig
    channels: ChannelConfig
    attacker: AttackerConfig
    detectors: list[DetectorConfig]
    moving_average_window: int
    horizon: int
    seed: int
    mc_runs: int
    x0: list[float] | None
    risk_c: float

    def validate(self) -> "Scenario":
        from .errors import ConfigurationError

        try:
            params = self.system_params()
            self.channels.build()
        except ValidationError:
            raise
        except ConfigurationError as exc:
            raise ValidationError(str(exc)) from exc
        _require(self.horizon >= 1, "horizon must be >= 1")
        _require(self.mc_runs >= 1, "mc_runs must be >= 1")
        _require(self.moving_average_window >= 1, "moving_average_window must be >= 1")
        _require(self.risk_c > 0.0, "risk_c must be positive")
        _require(self.seed >= 0, "seed must be a nonnegative integer")
        self.attacker.validate()
        names = [d.name for d in self.detectors]
        _require(len(names) == len(set(names)), "detector names must be unique")
        for det in self.detectors:
            det.validate()
        if self.detectors:
            event_rate = self.channels.alpha * self.channels.alpha_a
            _require(
                0.0 < event_rate < 1.0,
                "alpha * alpha_a must lie strictly inside (0, 1) for age-based detection",
            )
        if self.x0 is not None:
            _require(
                len(self.x0) == params.n,
                f"x0 must have dimension {params.n}, got {len(self.x0)}",
            )
        if not params.has_unstable_mode:
            warnings.warn(
                "A has no eigenvalue outside the unit circle; the eavesdropper's "
                "estimation error stays bounded, so secrecy-divergence claims do not apply",
                stacklevel=2,
            )
        return self

    def system_params(self) -> SystemParams:
        return self.system.build()

    def channel_params(self) -> ChannelParams:
        return self.channels.build()


# Reference parameter set for the default study.
PAPER_DEFAULTS: dict = {
    "system": {"a": 1.001, "c": 1.0, "q": 0.001, "r": 0.1, "sigma0": 1.0},
    "channels": {"alpha": 0.7, "alpha_a": 0.9, "alpha_e": 0.8},
    "attacker": {
        "kind": "selective",
        "activation_time": 900,
        "perfect_sync_until_activation": True,
    },
    "detectors": [
        {"name": "exact", "side": "receiver", "rho_i": 5e-6, "thresholds": [0.9875]},
        {
            "name": "misspec",
            "side": "receiver",
            "rho_i": 5e-6,
            "assumed_alpha_e": 0.98,
            "thresholds": [0.9865],
        },
        {
            "name": "sensor",
            "side": "sensor",
            "rho_i": 5e-6,
            "assumed_alpha_e": 0.98,
            "thresholds": [0.9865],
        },
    ],
    "moving_average_window": 150,
    "horizon": 2000,
    "seed": 20250901,
    "mc_runs": 500,
    "x0": [0.1],
    "risk_c": 0.001,
}


def _resolve_detector(entry: dict, channels: ChannelConfig) -> DetectorConfig:
    entry = dict(entry)
    name = entry.pop("name", None)
    _require(isinstance(name, str) and name, "every detector needs a non-empty name")
    side = entry.pop("side", "receiver")
    rho_i = entry.pop("rho_i", 5e-6)
    thresholds = entry.pop("thresholds", [0.9875])
    rho1 = entry.pop("rho1", None)
    rho2 = entry.pop("rho2", None)
    assumed = entry.pop("assumed_alpha_e", None)
    _require(not entry, f"detector {name!r} has unknown fields: {sorted(entry)}")
    if rho1 is None:
        rho1 = channels.alpha * channels.alpha_a
    if rho2 is None:
        effective_alpha_e = channels.alpha_e if assumed is None else assumed
        rho2 = channels.alpha * channels.alpha_a * effective_alpha_e
    else:
        _require(assumed is None, f"detector {name!r}: give rho2 or assumed_alpha_e, not both")
    return DetectorConfig(
        name=name,
        side=side,
        rho1=float(rho1),
        rho2=float(rho2),
        rho_i=float(rho_i),
        thresholds=[float(h) for h in thresholds],
    )


def _merge_section(defaults: dict, override: dict | None, section: str) -> dict:
    merged = copy.deepcopy(defaults)
    if override is None:
        return merged
    _require(isinstance(override, dict), f"{section} must be a JSON object")
    for key, value in override.items():
        _require(key in merged, f"{section} has unknown field {key!r}")
        merged[key] = value
    return merged


def scenario_from_dict(raw: dict) -> Scenario:
    """Build and validate a scenario, filling omitted fields from the
    reference defaults.  Accepts a manifest (with a ``scenario`` key) as
    well as a bare scenario object."""
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    if "scenario" in raw and isinstance(raw["scenario"], dict):
        raw = raw["scenario"]
    known = set(PAPER_DEFAULTS)
    unknown = set(raw) - known
    _require(not unknown, f"scenario has unknown fields: {sorted(unknown)}")

    system_raw = _merge_section(PAPER_DEFAULTS["system"], raw.get("system"), "system")
    system = SystemConfig(**{key: _matrix_field(value, key) for key, value in system_raw.items()})
    channels_raw = _merge_section(PAPER_DEFAULTS["channels"], raw.get("channels"), "channels")
    try:
        channels = ChannelConfig(**{k: float(v) for k, v in channels_raw.items()})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"channels: {exc}") from exc

    if "attacker" in raw and raw["attacker"] is not None:
        attacker_raw = dict(raw["attacker"])
        kind = attacker_raw.pop("kind", PAPER_DEFAULTS["attacker"]["kind"])
        _require(kind in ATTACKER_KINDS, f"attacker.kind must be one of {ATTACKER_KINDS}")
        attacker = AttackerConfig(
            kind=kind,
            activation_time=attacker_raw.pop("activation_time", None),
            activation_receipt=attacker_raw.pop("activation_receipt", None),
            activation_rho=attacker_raw.pop("activation_rho", None),
            perfect_sync_until_activation=bool(
                attacker_raw.pop("perfect_sync_until_activation", False)
            ),
        )
        _require(not attacker_raw, f"attacker has unknown fields: {sorted(attacker_raw)}")
    else:
        attacker = AttackerConfig(**PAPER_DEFAULTS["attacker"])

    detector_entries = raw.get("detectors", PAPER_DEFAULTS["detectors"])
    _require(isinstance(detector_entries, list), "detectors must be a list")
    detectors = [_resolve_detector(entry, channels) for entry in detector_entries]

    def scalar(key, caster):
        value = raw.get(key, PAPER_DEFAULTS[key])
        try:
            return caster(value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{key}: {exc}") from exc

    x0_raw = raw.get("x0", PAPER_DEFAULTS["x0"])
    x0 = None if x0_raw is None else [float(v) for v in np.atleast_1d(x0_raw)]

    scenario = Scenario(
        system=system,
        channels=channels,
        attacker=attacker,
        detectors=detectors,
        moving_average_window=scalar("moving_average_window", int),
        horizon=scalar("horizon", int),
        seed=scalar("seed", int),
        mc_runs=scalar("mc_runs", int),
        x0=x0,
        risk_c=scalar("risk_c", float),
    )
    return scenario.validate()


def scenario_to_dict(scenario: Scenario) -> dict:
    return asdict(scenario)


def default_scenario() -> Scenario:
    """The reference study with every field resolved."""
    return scenario_from_dict({})


def parse_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario (or manifest) file."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(raw)
