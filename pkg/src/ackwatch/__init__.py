"""Remote state estimation with state-secrecy coding over lossy channels,
a stealthy acknowledgment-blocking intruder, and Bayesian quickest-change
detection of that intruder at both the receiver and the sensor."""

__version__ = "0.1.0"

from .errors import (
    AckwatchError,
    ConfigurationError,
    DecodeError,
    EvaluationError,
    InvalidObservationError,
    LogRetentionError,
    ValidationError,
)
from .process_model import ProcessState, SensorEstimate, SystemParams
from .coding import Packet, ReceiverState
from .network import AttackerPolicy, ChannelParams, StepOutcome
from .qcd import AgeObservation, DetectorState, GeometricModel, RiskParams
from .scenario import Scenario, default_scenario, parse_scenario
from .simulator import RunTrace, SummaryStats, run_monte_carlo, run_once

__all__ = [
    "AckwatchError",
    "AgeObservation",
    "AttackerPolicy",
    "ChannelParams",
    "ConfigurationError",
    "DecodeError",
    "DetectorState",
    "EvaluationError",
    "GeometricModel",
    "InvalidObservationError",
    "LogRetentionError",
    "Packet",
    "ProcessState",
    "ReceiverState",
    "RiskParams",
    "RunTrace",
    "Scenario",
    "SensorEstimate",
    "StepOutcome",
    "SummaryStats",
    "SystemParams",
    "ValidationError",
    "default_scenario",
    "parse_scenario",
    "run_monte_carlo",
    "run_once",
]
