"""Small numerical helpers: error-free float transforms, symmetry control,
and cached integer matrix powers."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


def two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise error-free addition (Knuth's TwoSum).

    Returns arrays ``(s, e)`` with ``s = fl(a + b)`` and ``s + e == a + b``
    exactly in real arithmetic; ``e`` is representable because the rounding
    error of a float addition always is.  Branch-free, so it also holds when
    the operands have wildly different magnitudes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def compensated_reconstruct(z: np.ndarray, z_err: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Evaluate ``z + z_err + c`` so that the round trip through
    ``two_sum(a, -c)`` returns ``a`` bit-for-bit when the same ``c`` is used
    on both sides."""
    u, e2 = two_sum(np.asarray(z, dtype=float), np.asarray(c, dtype=float))
    return u + (e2 + np.asarray(z_err, dtype=float))


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """(M + M^T)/2; standard drift control after covariance updates."""
    return (mat + mat.T) / 2.0


def max_asymmetry(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0


def spd_factor(mat: np.ndarray, name: str, allow_semidefinite: bool = False) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == mat.

    Uses Cholesky for positive definite input.  With ``allow_semidefinite``
    a PSD matrix is accepted and factored through its eigendecomposition
    (tiny negative eigenvalues within -1e-12 are clipped).  Anything else is
    a configuration error: noise covariances are user inputs, a failed
    factorization must not be silently patched at runtime.
    """
    mat = np.asarray(mat, dtype=float)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        if not allow_semidefinite:
            raise ConfigurationError(
                f"{name} must be symmetric positive definite (Cholesky failed)"
            ) from None
    w, v = np.linalg.eigh(mat)
    if np.min(w) < -1e-12:
        raise ConfigurationError(f"{name} must be positive semidefinite, min eigenvalue {np.min(w):g}")
    return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


class MatrixPowerCache:
    """Integer powers of a fixed square matrix.

    Exponents repeat heavily inside a run (the reference time lag takes few
    distinct values), so every computed power is memoized; new exponents are
    assembled from cached binary powers.
    """

    def __init__(self, base: np.ndarray):
        base = np.asarray(base, dtype=float)
        if base.ndim != 2 or base.shape[0] != base.shape[1]:
            raise ConfigurationError("matrix power base must be square")
        n = base.shape[0]
        self._powers: dict[int, np.ndarray] = {0: np.eye(n), 1: base.copy()}

    def __call__(self, exponent: int) -> np.ndarray:
        if exponent < 0:
            raise ConfigurationError("matrix power exponent must be nonnegative")
        cached = self._powers.get(exponent)
        if cached is not None:
            return cached
        half = self(exponent // 2)
        result = half @ half
        if exponent % 2:
            result = result @ self._powers[1]
        self._powers[exponent] = result
        return result
