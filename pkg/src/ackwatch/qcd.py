"""Bayesian quickest change detection on age observations.

The receiver observes the age of innovation at every packet receipt: the
gap between the receipt time and the reference time carried in the packet.
Before the intrusion that age is geometric with parameter rho1 = alpha *
alpha_a; once the attacker selectively blocks acknowledgments it becomes
geometric with rho2 = alpha * alpha_a * alpha_e.  The intrusion onset is
modeled as geometric with parameter rho_i over the receipt index.

With those three ingredients the no-change posterior

    Z_m = P(change has not occurred by receipt m | ages 1..m)

admits a scalar recursion:

    Z_m = N_m (1 - rho_i) b1(A_m) Z_{m-1},
    1/N_m = b2(A_m) + (1 - rho_i) (b1(A_m) - b2(A_m)) Z_{m-1},

started from Z_0 = 1, where b1/b2 are the pre-/post-change age pmfs.  The
optimal stopping rule declares the intruder the first time Z_m falls to or
below a threshold h chosen to manage the false-alarm probability.

The sensor runs the identical machinery on the age of acknowledgment at
each ack receipt; only the observation stream differs.  A mis-specified
detector is likewise pure configuration: rho2 built from an assumed bound
on the eavesdropper's channel quality instead of the true value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, EvaluationError, InvalidObservationError

# Below this the posterior is effectively absorbed at zero; the linear
# recursion is allowed to underflow (never to NaN) while the log-space
# companion keeps tracking the magnitude for traces and figures.
_LINEAR_FLOOR = 1e-300


def geometric_pmf(rho: float, kappa: int) -> float:
    """P(age = kappa) under a geometric law with success parameter rho.

    Support starts at 1: returns rho * (1 - rho)^(kappa - 1) for kappa >= 1
    and 0 otherwise.
    """
    if not 0.0 < rho < 1.0:
        raise ConfigurationError(f"geometric parameter must be in (0, 1), got {rho}")
    if kappa < 1:
        return 0.0
    return rho * (1.0 - rho) ** (kappa - 1)


@dataclass(frozen=True)
class GeometricModel:
    """Pre-change, post-change, and change-onset geometric parameters."""

    rho1: float
    rho2: float
    rho_i: float

    def __post_init__(self):
        for name, p in (("rho1", self.rho1), ("rho2", self.rho2), ("rho_i", self.rho_i)):
            if not 0.0 < p < 1.0:
                raise ConfigurationError(f"{name} must be in the open interval (0, 1), got {p}")
        if self.rho2 > self.rho1:
            raise ConfigurationError(
                "rho2 must not exceed rho1: blocking can only slow acknowledgment success"
            )

    @classmethod
    def from_channels(cls, alpha: float, alpha_a: float, alpha_e: float, rho_i: float) -> "GeometricModel":
        """Exact-knowledge model: rho1 = alpha*alpha_a, rho2 = alpha*alpha_a*alpha_e."""
        return cls(rho1=alpha * alpha_a, rho2=alpha * alpha_a * alpha_e, rho_i=rho_i)

    @classmethod
    def with_assumed_eavesdropper(
        cls, alpha: float, alpha_a: float, assumed_alpha_e: float, rho_i: float
    ) -> "GeometricModel":
        """Mis-specified model built from an assumed upper bound on the
        eavesdropper's channel quality."""
        return cls(rho1=alpha * alpha_a, rho2=alpha * alpha_a * assumed_alpha_e, rho_i=rho_i)

    def b1(self, age: int) -> float:
        return geometric_pmf(self.rho1, age)

    def b2(self, age: int) -> float:
        return geometric_pmf(self.rho2, age)

    @property
    def mean_age_pre(self) -> float:
        return 1.0 / self.rho1

    @property
    def mean_age_post(self) -> float:
        return 1.0 / self.rho2


@dataclass(frozen=True)
class AgeObservation:
    """One age sample: receipt (or ack) index, its time, and the age."""

    receipt_index: int
    receipt_time: int
    age: int

    def __post_init__(self):
        if self.receipt_index < 1:
            raise ConfigurationError("receipt index starts at 1")
        if self.age < 1:
            raise InvalidObservationError(
                f"age must be >= 1, got {self.age} (reference time must strictly precede receipt)"
            )


def age_from_packet(
    receipt_time: int, packet_ref_time: int, receipt_index: int = 1
) -> AgeObservation:
    """Age observation from a receipt: age = receipt time - packet reference time."""
    if receipt_time <= packet_ref_time:
        raise InvalidObservationError(
            f"receipt time {receipt_time} must exceed the packet reference time {packet_ref_time}"
        )
    return AgeObservation(
        receipt_index=receipt_index, receipt_time=receipt_time, age=receipt_time - packet_ref_time
    )


@dataclass(frozen=True)
class DetectorState:
    """No-change posterior with its threshold and latched alarm.

    ``log_z_hat`` tracks log(Z) through territory where the linear value has
    underflowed to zero; underflow is absorbing and harmless for stopping
    (the alarm has long fired) but the log keeps traces finite and NaN-free.
    """

    z_hat: float
    log_z_hat: float
    threshold: float
    alarmed: bool = False
    alarm_receipt: int | None = None
    alarm_time: int | None = None

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigurationError(f"threshold must be in (0, 1), got {self.threshold}")
        if not 0.0 <= self.z_hat <= 1.0:
            raise ConfigurationError(f"posterior must lie in [0, 1], got {self.z_hat}")

    @classmethod
    def initial(cls, threshold: float) -> "DetectorState":
        """Fresh detector with Z_0 = 1 (change has surely not happened yet)."""
        return cls(z_hat=1.0, log_z_hat=0.0, threshold=threshold)


def _advance_posterior(z: float, log_z: float, age: int, model: GeometricModel) -> tuple[float, float]:
    """One step of the scalar no-change recursion, in linear and log space.

    The linear update is exact in the ordinary regime.  Huge ages (hundreds
    of steps under total blocking) underflow the geometric pmfs, so the log
    companion is built from analytic log-pmfs; the linear value is then
    allowed to absorb at zero without ever producing a NaN.
    """
    if age < 1:
        raise InvalidObservationError(
            f"observation with age {age} has zero probability under both models"
        )
    b1 = model.b1(age)
    b2 = model.b2(age)
    survive = 1.0 - model.rho_i
    log_survive = math.log1p(-model.rho_i)
    log_b1 = math.log(model.rho1) + (age - 1) * math.log1p(-model.rho1)
    log_b2 = math.log(model.rho2) + (age - 1) * math.log1p(-model.rho2)
    # Denominator b2 (1 - survive z) + survive b1 z, assembled in log space.
    keep_going = log_survive + log_b1 + log_z
    log_denom = float(np.logaddexp(log_b2 + math.log1p(-survive * z), keep_going))
    log_z_new = keep_going - log_denom

    denom = b2 + survive * (b1 - b2) * z
    if denom > 0.0:
        # The exact value lies in [0, 1]; clamp the last-ulp excursions.
        z_new = min(max(survive * b1 * z / denom, 0.0), 1.0)
    else:
        z_new = float(np.exp(log_z_new))
    if z_new > _LINEAR_FLOOR:
        log_z_new = math.log(z_new)
    return z_new, log_z_new


def posterior_update(state: DetectorState, obs: AgeObservation, model: GeometricModel) -> DetectorState:
    """Fold one age observation into the no-change posterior.

    Returns a new state; the first time the posterior reaches the threshold
    the alarm latches with the observation's receipt index and time, and it
    never resets within a run.
    """
    z_new, log_z_new = _advance_posterior(state.z_hat, state.log_z_hat, obs.age, model)
    if not state.alarmed and z_new <= state.threshold:
        return replace(
            state,
            z_hat=z_new,
            log_z_hat=log_z_new,
            alarmed=True,
            alarm_receipt=obs.receipt_index,
            alarm_time=obs.receipt_time,
        )
    return replace(state, z_hat=z_new, log_z_hat=log_z_new)


def stopping_decision(state: DetectorState) -> bool:
    """Optimal stopping rule: alarm when the no-change posterior has fallen
    to or below the threshold (boundary inclusive)."""
    return state.z_hat <= state.threshold


def no_change_posterior_path(
    ages: Sequence[int] | np.ndarray, model: GeometricModel
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior after each observation of an age sequence.

    Returns ``(z, log_z)`` arrays, one entry per observation.  Entry i is
    the posterior after the (i+1)-th age.  Equivalent to folding
    `posterior_update` over the sequence, specialized for bulk evaluation.
    """
    z = 1.0
    log_z = 0.0
    out = np.empty(len(ages))
    out_log = np.empty(len(ages))
    for i, age in enumerate(ages):
        z, log_z = _advance_posterior(z, log_z, int(age), model)
        out[i] = z
        out_log[i] = log_z
    return out, out_log


def first_crossing(z_path: np.ndarray, threshold: float) -> int | None:
    """First index (1-based receipt index) at which the posterior is <= threshold."""
    hits = np.flatnonzero(z_path <= threshold)
    return int(hits[0]) + 1 if hits.size else None


def moving_average_detector(
    ages: Sequence[int] | np.ndarray, window: int
) -> np.ndarray:
    """Sliding mean of the last ``window`` ages.

    Emits one value per receipt from receipt ``window`` onward (empty when
    fewer ages than the window).  The comparison levels are the theoretical
    means 1/rho1 and 1/rho2 from the `GeometricModel` in use.
    """
    if window < 1:
        raise ConfigurationError(f"window must be >= 1, got {window}")
    ages = np.asarray(ages, dtype=float)
    if ages.size < window:
        return np.empty(0)
    cumulative = np.concatenate(([0.0], np.cumsum(ages)))
    return (cumulative[window:] - cumulative[:-window]) / window


@dataclass(frozen=True)
class RiskParams:
    """Per-receipt delay penalty for the Bayes risk."""

    c: float

    def __post_init__(self):
        if self.c <= 0.0:
            raise ConfigurationError(f"delay penalty must be positive, got {self.c}")


def bayes_risk(outcomes: Iterable[tuple[float, float]], risk: RiskParams) -> float:
    """Sample estimate of c * E[(tau - lambda)+] + P(tau < lambda).

    ``outcomes`` yields one (tau, lambda) pair per run, both in the receipt
    domain.  Runs that alarm at or after the change contribute their delay;
    runs that alarm before it contribute a false alarm and zero delay.
    """
    taus_lams = list(outcomes)
    if not taus_lams:
        raise EvaluationError("cannot evaluate Bayes risk on an empty run set")
    delays = [max(0.0, tau - lam) for tau, lam in taus_lams]
    false_alarms = [1.0 if tau < lam else 0.0 for tau, lam in taus_lams]
    return risk.c * float(np.mean(delays)) + float(np.mean(false_alarms))
