"""Lossy channels and the acknowledgment-channel attacker.

Three independent Bernoulli channels per step: sensor-to-receiver (gamma),
sensor-to-eavesdropper (gamma_e), and receiver-to-sensor acknowledgment
(gamma_a).  Acknowledgments are only sent on successful receipt, so the ack
outcome is conditionally i.i.d. given gamma = 1.

The attacker interferes only with acknowledgments.  Blocking is modeled as
channel-level erasure: the legitimate estimator still transmits the ack and
neither endpoint observes the interference directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class ChannelParams:
    """Success probabilities of the three channels."""

    alpha: float
    alpha_a: float
    alpha_e: float

    def __post_init__(self):
        for name, p in (("alpha", self.alpha), ("alpha_a", self.alpha_a), ("alpha_e", self.alpha_e)):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {p}")


@dataclass(frozen=True)
class AttackerPolicy:
    """Acknowledgment-blocking policy.

    ``activation_receipt`` is the legitimate packet-receipt index at which
    the attacker begins acting (the change point lives in the receipt
    domain, not in wall-clock steps).  ``None`` means the attacker never
    activates within the run, which is how a passive policy is normally
    expressed.
    """

    kind: str
    activation_receipt: int | None = 1

    VALID_KINDS = ("passive", "block_all", "selective")

    def __post_init__(self):
        if self.kind not in self.VALID_KINDS:
            raise ConfigurationError(f"attacker kind must be one of {self.VALID_KINDS}")
        if self.activation_receipt is not None and self.activation_receipt < 1:
            raise ConfigurationError("activation receipt index must be >= 1")


@dataclass(frozen=True)
class StepOutcome:
    """Per-step channel triple plus the attacker's block decision."""

    k: int
    gamma: bool
    gamma_e: bool
    gamma_a: bool
    blocked: bool
    ack_delivered: bool

    @classmethod
    def build(cls, k: int, gamma: bool, gamma_e: bool, gamma_a: bool, blocked: bool) -> "StepOutcome":
        """Derive ack delivery: an ack reaches the sensor only when the packet
        was received, the ack channel succeeded, and the attacker let it pass."""
        return cls(
            k=k,
            gamma=bool(gamma),
            gamma_e=bool(gamma_e),
            gamma_a=bool(gamma_a),
            blocked=bool(blocked),
            ack_delivered=bool(gamma) and bool(gamma_a) and not bool(blocked),
        )


def sample_step(params: ChannelParams, rng: np.random.Generator) -> tuple[bool, bool, bool]:
    """Draw one step of the three independent channels.

    Draw order is fixed (gamma, gamma_e, gamma_a) so results are reproducible
    for a given generator state.
    """
    gamma = bool(rng.random() < params.alpha)
    gamma_e = bool(rng.random() < params.alpha_e)
    gamma_a = bool(rng.random() < params.alpha_a)
    return gamma, gamma_e, gamma_a


def decide_block(
    policy: AttackerPolicy, receipt_index: int, gamma: bool, gamma_e: bool
) -> bool:
    """Attacker's block decision for the current step.

    ``receipt_index`` counts legitimate receipts so far, including the
    current step when gamma is set.  A passive attacker never blocks.  A
    block-all attacker blocks everything once active.  The selective
    attacker blocks only the critical event: packet received by the
    legitimate estimator but missed by the eavesdropper.  When both receive
    the packet the ack is allowed through, and when the legitimate estimator
    received nothing there is no ack to block.
    """
    if policy.kind == "passive" or policy.activation_receipt is None:
        return False
    active = receipt_index >= policy.activation_receipt
    if not active:
        return False
    if policy.kind == "block_all":
        return True
    return bool(gamma) and not bool(gamma_e)


def update_ack_reference(t_k: int, outcome: StepOutcome) -> int:
    """Advance the last-acknowledged time to k when the ack arrived."""
    if t_k >= outcome.k:
        raise ConfigurationError(
            f"reference time {t_k} must precede the current step {outcome.k}"
        )
    return outcome.k if outcome.ack_delivered else t_k
