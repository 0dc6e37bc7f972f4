"""State-secrecy transmission coding.

The sensor never transmits its estimate directly.  It sends the innovation
against the last acknowledged estimate, propagated through the dynamics:

    z_k = x_hat_k^s - A^(k - t_k) x_hat_{t_k}^s

together with the reference time t_k.  A receiver that holds the sensor's
value at t_k recovers x_hat_k^s exactly; a receiver that missed the packet
at t_k decodes with an error amplified by A^(k - t_k), which grows without
bound for unstable dynamics.  That asymmetry is the secrecy mechanism, and
its failure mode (an attacker controlling when t_k advances) is what the
detection layer watches for.

Packets carry the innovation as an error-free float pair (value plus the
rounding residual of the subtraction), so decoding against the same
reference reproduces the sensor estimate bit-for-bit rather than to within
roundoff; the scheme is defined in exact arithmetic and the simulator keeps
that contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DecodeError, LogRetentionError
from .numerics import compensated_reconstruct, symmetrize, two_sum
from .process_model import SensorCovarianceTable, SensorEstimate, SystemParams


@dataclass(frozen=True)
class Packet:
    """Encoded innovation plus the reference time it was computed against."""

    innovation: np.ndarray
    innovation_residual: np.ndarray
    ref_time: int
    send_time: int

    def __post_init__(self):
        object.__setattr__(self, "innovation", np.asarray(self.innovation, dtype=float).reshape(-1))
        object.__setattr__(
            self, "innovation_residual", np.asarray(self.innovation_residual, dtype=float).reshape(-1)
        )
        if not (np.all(np.isfinite(self.innovation)) and np.all(np.isfinite(self.innovation_residual))):
            raise ConfigurationError("packet innovation must be finite")
        if self.ref_time < 0 or self.send_time < 1 or self.ref_time >= self.send_time:
            raise ConfigurationError(
                f"packet reference time {self.ref_time} must precede send time {self.send_time}"
            )


class EstimateLog:
    """Map from time index to the (estimate, covariance) held at that time.

    Retention is unbounded: under acknowledgment blocking the reference time
    can lag arbitrarily far behind, so pruning would break decoding.
    """

    def __init__(self):
        self._entries: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def put(self, k: int, x_hat: np.ndarray, P: np.ndarray) -> None:
        self._entries[k] = (np.array(x_hat, dtype=float), np.array(P, dtype=float))

    def get(self, k: int) -> tuple[np.ndarray, np.ndarray] | None:
        return self._entries.get(k)

    def __contains__(self, k: int) -> bool:
        return k in self._entries

    def __len__(self) -> int:
        return len(self._entries)


def encode(
    sensor_est: SensorEstimate,
    sensor_log: EstimateLog,
    t_k: int,
    k: int,
    params: SystemParams,
) -> Packet:
    """Build the packet z_k = {x_hat_k^s - A^(k-t_k) x_hat_{t_k}^s, t_k}."""
    entry = sensor_log.get(t_k)
    if entry is None:
        raise LogRetentionError(f"sensor log is missing the estimate at reference time {t_k}")
    reference = params.power(k - t_k) @ entry[0]
    z, z_err = two_sum(sensor_est.x_hat_s, -reference)
    return Packet(innovation=z, innovation_residual=z_err, ref_time=t_k, send_time=k)


@dataclass
class ReceiverState:
    """Decoder state for the legitimate estimator or the eavesdropper.

    Holds the current estimate and covariance, a log of every past
    (estimate, covariance) pair for reference-time lookups, and the public
    sensor covariance table.  ``synced`` reports whether the current
    estimate equals the sensor's (true after a receipt decoded against an
    intact reference, false after any dropout prediction).
    """

    params: SystemParams
    x_hat: np.ndarray
    P: np.ndarray
    k: int = 0
    synced: bool = True
    log: EstimateLog = field(default_factory=EstimateLog)
    cov_table: SensorCovarianceTable | None = None

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float).reshape(-1)
        self.P = np.asarray(self.P, dtype=float)
        if self.cov_table is None:
            self.cov_table = SensorCovarianceTable(self.params)
        self.log.put(self.k, self.x_hat, self.P)

    @classmethod
    def at_origin(cls, params: SystemParams, origin: SensorEstimate) -> "ReceiverState":
        """Receiver synchronized at the virtual origin t=0 (the sensor's
        initial estimate is broadcast once at setup)."""
        return cls(params=params, x_hat=origin.x_hat_s, P=origin.P_s, k=0, synced=True)


def decode_receipt(rx: ReceiverState, pkt: Packet, params: SystemParams) -> ReceiverState:
    """Decode a received packet: x_hat_k = z_k + A^(k-t_k) x_hat_{t_k}.

    When the logged value at t_k is the sensor's, the result is the sensor
    estimate bit-for-bit and P_k = P_k^s.  When it differs by d, the result
    is off by A^(k-t_k) d, and the covariance follows

        P_k = P_k^s + A^(k-t_k) (P_{t_k} - P_{t_k}^s) A^(k-t_k)^T,

    which reduces to the sensor covariance for a synchronized reference.
    Updates ``rx`` in place and returns it.
    """
    entry = rx.log.get(pkt.ref_time)
    if entry is None:
        raise DecodeError(
            f"packet references time {pkt.ref_time} outside the retained history"
        )
    lag = pkt.send_time - pkt.ref_time
    propagator = params.power(lag)
    reference = propagator @ entry[0]
    rx.x_hat = compensated_reconstruct(pkt.innovation, pkt.innovation_residual, reference)

    sensor_cov_now = rx.cov_table.at(pkt.send_time)
    cov_offset = entry[1] - rx.cov_table.at(pkt.ref_time)
    rx.synced = not np.any(cov_offset)
    rx.P = symmetrize(sensor_cov_now + propagator @ cov_offset @ propagator.T)
    rx.k = pkt.send_time
    rx.log.put(rx.k, rx.x_hat, rx.P)
    return rx


def predict_on_dropout(rx: ReceiverState, params: SystemParams) -> ReceiverState:
    """On a dropout the dynamics supply a prediction from the last decoded
    estimate: x_hat_k = A x_hat_{k-1}, P_k = A P_{k-1} A^T + Q.

    Updates ``rx`` in place and returns it.
    """
    rx.x_hat = params.A @ rx.x_hat
    rx.P = symmetrize(params.A @ rx.P @ params.A.T + params.Q)
    rx.k += 1
    rx.synced = False
    rx.log.put(rx.k, rx.x_hat, rx.P)
    return rx
