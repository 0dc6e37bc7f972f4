"""Discrete-time LTI process with Gaussian noise and the sensor-side Kalman
filter that produces the optimal estimate transmitted over the network.

The model is

    x_{k+1} = A x_k + w_k,   y_k = C x_k + r_k,

with w_k ~ N(0, Q), r_k ~ N(0, R), and x_0 ~ N(0, Sigma0).  The sensor runs
a standard time-varying Kalman filter; its error covariance follows the
Riccati recursion and converges to the steady-state fixed point.  The
covariance sequence depends only on the public matrices, never on the
measurements, so receivers can reproduce it locally (`SensorCovarianceTable`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError
from .numerics import MatrixPowerCache, max_asymmetry, spd_factor, symmetrize

SYMMETRY_TOL = 1e-9


def _as_matrix(value, name: str) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(value, dtype=float))
    if mat.ndim != 2:
        raise ConfigurationError(f"{name} must be a matrix, got ndim={mat.ndim}")
    return mat


@dataclass(frozen=True)
class SystemParams:
    """Public system description: dynamics, output map, and noise covariances.

    Q, R and Sigma0 must be symmetric positive definite and (A, C) observable,
    (A, sqrt(Q)) controllable.  ``allow_degenerate=True`` relaxes Q/Sigma0 to
    positive semidefinite and skips the structural rank checks; this exists
    for constructing textbook edge cases (zero process noise, zero output
    map) and is never used by the shipped scenarios.
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma0: np.ndarray
    allow_degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "C", _as_matrix(self.C, "C"))
        object.__setattr__(self, "Q", _as_matrix(self.Q, "Q"))
        object.__setattr__(self, "R", _as_matrix(self.R, "R"))
        object.__setattr__(self, "Sigma0", _as_matrix(self.Sigma0, "Sigma0"))
        n = self.A.shape[0]
        m = self.C.shape[0]
        if self.A.shape != (n, n):
            raise ConfigurationError("A must be square")
        if self.C.shape != (m, n):
            raise ConfigurationError(f"C must have {n} columns, got {self.C.shape}")
        for name, mat, shape in (
            ("Q", self.Q, (n, n)),
            ("R", self.R, (m, m)),
            ("Sigma0", self.Sigma0, (n, n)),
        ):
            if mat.shape != shape:
                raise ConfigurationError(f"{name} must have shape {shape}, got {mat.shape}")
            if max_asymmetry(mat) > SYMMETRY_TOL:
                raise ConfigurationError(f"{name} must be symmetric")
        # Factors double as the positive-definiteness check.
        object.__setattr__(
            self, "_chol_q", spd_factor(self.Q, "Q", allow_semidefinite=self.allow_degenerate)
        )
        object.__setattr__(self, "_chol_r", spd_factor(self.R, "R"))
        object.__setattr__(
            self,
            "_chol_sigma0",
            spd_factor(self.Sigma0, "Sigma0", allow_semidefinite=self.allow_degenerate),
        )
        if not self.allow_degenerate:
            if not self._observable():
                raise ConfigurationError("(A, C) must be observable")
            if not self._controllable():
                raise ConfigurationError("(A, sqrt(Q)) must be controllable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @cached_property
    def power(self) -> MatrixPowerCache:
        """Cached integer powers of A (shared reference-time propagation)."""
        return MatrixPowerCache(self.A)

    @property
    def has_unstable_mode(self) -> bool:
        """True when A has an eigenvalue outside the unit circle; the
        secrecy-divergence mechanism relies on this (stable A degrades to a
        bounded open-loop error instead)."""
        return bool(np.max(np.abs(np.linalg.eigvals(self.A))) > 1.0)

    def _observable(self) -> bool:
        blocks = [self.C @ self.power(i) for i in range(self.n)]
        return np.linalg.matrix_rank(np.vstack(blocks)) == self.n

    def _controllable(self) -> bool:
        b = self._chol_q
        blocks = [self.power(i) @ b for i in range(self.n)]
        return np.linalg.matrix_rank(np.hstack(blocks)) == self.n

    def sample_initial_state(self, rng: np.random.Generator | None) -> np.ndarray:
        if rng is None:
            return np.zeros(self.n)
        return self._chol_sigma0 @ rng.standard_normal(self.n)

    def process_noise(self, rng: np.random.Generator | None) -> np.ndarray:
        if rng is None:
            return np.zeros(self.n)
        return self._chol_q @ rng.standard_normal(self.n)

    def measurement_noise(self, rng: np.random.Generator | None) -> np.ndarray:
        if rng is None:
            return np.zeros(self.m)
        return self._chol_r @ rng.standard_normal(self.m)


@dataclass(frozen=True)
class ProcessState:
    """True process state x_k at time index k."""

    k: int
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        if self.k < 0:
            raise ConfigurationError("time index must be nonnegative")


@dataclass(frozen=True)
class SensorEstimate:
    """Kalman pair (x_hat_s, P_s) held at the sensor."""

    x_hat_s: np.ndarray
    P_s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_hat_s", np.asarray(self.x_hat_s, dtype=float).reshape(-1))
        object.__setattr__(self, "P_s", _as_matrix(self.P_s, "P_s"))
        if max_asymmetry(self.P_s) > SYMMETRY_TOL:
            raise ConfigurationError("P_s must be symmetric")


def step_process(
    state: ProcessState, params: SystemParams, rng: np.random.Generator | None
) -> ProcessState:
    """Advance the state one step: x_{k+1} = A x_k + w_k.

    ``rng=None`` zeroes the process noise (deterministic stepping for forced
    scenarios and tests).
    """
    if state.x.shape[0] != params.n:
        raise ConfigurationError(
            f"state dimension {state.x.shape[0]} does not match system dimension {params.n}"
        )
    w = params.process_noise(rng)
    return ProcessState(k=state.k + 1, x=params.A @ state.x + w)


def measure(
    state: ProcessState, params: SystemParams, rng: np.random.Generator | None
) -> np.ndarray:
    """Observe y_k = C x_k + r_k.  ``rng=None`` zeroes the measurement noise."""
    if state.x.shape[0] != params.n:
        raise ConfigurationError(
            f"state dimension {state.x.shape[0]} does not match system dimension {params.n}"
        )
    return params.C @ state.x + params.measurement_noise(rng)


def _initial_covariance(params: SystemParams) -> np.ndarray:
    """Posterior covariance of the k=0 update applied to the prior (0, Sigma0)."""
    return _measurement_update(params.Sigma0, params)[1]


def _measurement_update(P_pred: np.ndarray, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Gain and posterior covariance for a predicted covariance."""
    C = params.C
    S = C @ P_pred @ C.T + params.R
    K = np.linalg.solve(S.T, (P_pred @ C.T).T).T
    P = symmetrize((np.eye(params.n) - K @ C) @ P_pred)
    return K, P

def _riccati_step(P: np.ndarray, params: SystemParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One predict+update pass on a posterior covariance.

    Returns (P_pred, K, P_new).  Shared by the filter and by
    `SensorCovarianceTable` so both produce bit-identical sequences.
    """
    P_pred = symmetrize(params.A @ P @ params.A.T + params.Q)
    K, P_new = _measurement_update(P_pred, params)
    return P_pred, K, P_new


def init_estimate(y0: np.ndarray, params: SystemParams) -> SensorEstimate:
    """Sensor estimate at k=0: Kalman update of the prior (0, Sigma0) with y_0."""
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    K, P = _measurement_update(params.Sigma0, params)
    return SensorEstimate(x_hat_s=K @ y0, P_s=P)


def kalman_step(est: SensorEstimate, y: np.ndarray, params: SystemParams) -> SensorEstimate:
    """Time-and-measurement update of the sensor filter with measurement y.

    The time-varying gain is used throughout; it converges to the
    steady-state gain, which the filter therefore matches asymptotically.
    """
    if est.x_hat_s.shape[0] != params.n:
        raise ConfigurationError("estimate dimension does not match system")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != params.m:
        raise ConfigurationError(f"measurement dimension {y.shape[0]} != {params.m}")
    x_pred = params.A @ est.x_hat_s
    _, K, P_new = _riccati_step(est.P_s, params)
    x_new = x_pred + K @ (y - params.C @ x_pred)
    return SensorEstimate(x_hat_s=x_new, P_s=P_new)


class SensorCovarianceTable:
    """Deterministic sensor covariance sequence P_k^s, k = 0, 1, ...

    The Kalman covariance never depends on measurements, only on the public
    matrices, so any network node can tabulate it.  Values are bit-identical
    to what `kalman_step` produces because both run the same recursion from
    the same k=0 posterior.
    """

    def __init__(self, params: SystemParams):
        self._params = params
        self._posteriors: list[np.ndarray] = [_initial_covariance(params)]

    def at(self, k: int) -> np.ndarray:
        if k < 0:
            raise ConfigurationError("covariance table index must be nonnegative")
        while len(self._posteriors) <= k:
            _, _, P_new = _riccati_step(self._posteriors[-1], self._params)
            self._posteriors.append(P_new)
        return self._posteriors[k]


def steady_state_covariance(
    params: SystemParams, tol: float = 1e-12, max_iter: int = 100_000
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed point of the Riccati recursion: (predicted, posterior) covariance.

    Iterates until successive predicted covariances differ by less than
    ``tol`` in max-abs norm.
    """
    P = _initial_covariance(params)
    P_pred_prev = None
    for _ in range(max_iter):
        P_pred, _, P = _riccati_step(P, params)
        if P_pred_prev is not None and float(np.max(np.abs(P_pred - P_pred_prev))) < tol:
            return P_pred, P
        P_pred_prev = P_pred
    raise ConfigurationError(f"Riccati recursion did not converge within {max_iter} iterations")
