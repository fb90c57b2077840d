"""Recursive least squares for FORCE weight updates.

One :class:`RlsState` holds the running inverse correlation matrix ``P`` of
an activity vector. Several weight blocks driven by the same activity can
share it: the ``P`` recursion never looks at the error.

``P`` is kept in symmetric (upper-triangle) storage and updated with
``dsyr``, so the matrix it represents is exactly symmetric at every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas

from .errors import ConfigError, DimensionError, NumericInputError


@dataclass
class RlsState:
    upper: np.ndarray
    alpha: float
    update_count: int = 0

    @property
    def n(self) -> int:
        return self.upper.shape[0]

    @property
    def P(self) -> np.ndarray:
        """The full symmetric matrix (a fresh array)."""
        u = np.triu(self.upper)
        return u + np.triu(u, 1).T

    def copy(self) -> "RlsState":
        return RlsState(np.asfortranarray(self.upper.copy()), self.alpha, self.update_count)

    def quad(self, y: np.ndarray) -> float:
        """``y^T P y``."""
        return float(y @ blas.dsymv(1.0, self.upper, y))

    def update(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        """Apply the ``P`` recursion for activity ``y`` in place.

        Returns ``(k, yPy)`` where ``k = P_new @ y`` is the gain vector used by
        the weight update and ``yPy`` is ``y^T P_old y``.
        """
        py = blas.dsymv(1.0, self.upper, y)
        ypy = float(y @ py)
        den = 1.0 + ypy
        self.upper = blas.dsyr(-1.0 / den, py, a=self.upper, overwrite_a=True)
        self.update_count += 1
        return py / den, ypy


def rls_init(n: int, alpha: float = 1.0) -> RlsState:
    """Fresh state with ``P = I / alpha``."""
    if int(n) != n or n < 1:
        raise ConfigError(f"dimension must be a positive integer, got {n}")
    if not (np.isfinite(alpha) and alpha > 0):
        raise ConfigError(f"alpha must be positive, got {alpha}")
    return RlsState(np.asfortranarray(np.eye(int(n)) / alpha), float(alpha))


def _check(state: RlsState, y, e_pre, W):
    y = np.asarray(y, dtype=float)
    e = np.atleast_1d(np.asarray(e_pre, dtype=float))
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if y.shape != (state.n,):
        raise DimensionError(f"activity has shape {y.shape}, P is {state.n}x{state.n}")
    if W.shape != (state.n, e.shape[0]):
        raise DimensionError(f"W has shape {W.shape}, expected ({state.n}, {e.shape[0]})")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(e)) and np.all(np.isfinite(W))):
        raise NumericInputError("non-finite input to rls_step")
    return y, e, W


def rls_step(state: RlsState, y, e_pre, W) -> tuple[RlsState, np.ndarray]:
    """One FORCE update; returns a new state and new weights.

    ``W`` has one column per output (shape ``(n,)`` or ``(n, d_out)``) and
    ``e_pre = W.T @ y - target`` is the error before the update. ``P`` is
    updated first; every column of ``W`` then moves by ``-e_i * P_new @ y``.
    """
    y, e, W_arr = _check(state, y, e_pre, W)
    new = state.copy()
    k, _ = new.update(y)
    W_new = W_arr - np.outer(k, e)
    if np.ndim(W) == 1:
        W_new = W_new[:, 0]
    return new, W_new


def posterior_error(e_pre, y, P_prev) -> np.ndarray:
    """Error after the update, ``e_pre / (1 + y^T P_prev y)``."""
    y = np.asarray(y, dtype=float)
    P_prev = np.asarray(P_prev, dtype=float)
    if P_prev.shape != (y.shape[0], y.shape[0]):
        raise DimensionError(f"P {P_prev.shape} does not match y {y.shape}")
    return np.asarray(e_pre, dtype=float) / (1.0 + y @ P_prev @ y)


def is_positive_definite(P: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return True

