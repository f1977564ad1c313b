"""Ridge-regression readout from compact reservoir states to (x, y)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DataError, NumericalError

RESIDUAL_TOL = 1e-8
DEFAULT_RELATIVE_RIDGE = 1e-6


@dataclass(frozen=True)
class ReadoutModel:
    """Linear readout ``p = W.T @ [z, 1]``; the last row of ``weights`` is the bias."""

    weights: np.ndarray
    ridge: float
    free_bias: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, order="C")
        if w.ndim != 2 or w.shape[0] < 2:
            raise DataError("readout weights must be a (D+1) x n_out matrix")
        if not np.all(np.isfinite(w)):
            raise DataError("non-finite readout weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0] - 1


def augment(z) -> np.ndarray:
    """Append the constant-1 bias column to projected states."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return np.hstack([z, np.ones((z.shape[0], 1))])


def default_ridge(z_aug) -> float:
    """Scale-relative ridge: ``1e-6 * trace(Z.T Z) / (D + 1)``."""
    z_aug = np.asarray(z_aug, dtype=float)
    return DEFAULT_RELATIVE_RIDGE * float(np.sum(z_aug**2)) / z_aug.shape[1]


def train_ridge(z_aug, targets, ridge: Optional[float] = None,
                free_bias: bool = False) -> ReadoutModel:
    """Solve ``(Z.T Z + eps I) W = Z.T P`` by Cholesky factorization.

    Args:
        z_aug: ``N x (D+1)`` training matrix whose last column is all ones.
        targets: ``N x 2`` ground-truth positions.
        ridge: regularization ``eps``; None picks :func:`default_ridge`.
        free_bias: leave the bias row out of the penalty.
    """
    Z = np.asarray(z_aug, dtype=float)
    P = np.asarray(targets, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if Z.ndim != 2 or Z.shape[0] != P.shape[0] or Z.shape[0] < 1:
        raise DataError(f"training shapes do not agree: Z {Z.shape}, P {P.shape}")
    if not np.allclose(Z[:, -1], 1.0, rtol=0, atol=0):
        raise DataError("last column of the training matrix must be all ones")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(P))):
        raise DataError("non-finite training data")
    eps = default_ridge(Z) if ridge is None else float(ridge)
    if eps < 0 or not np.isfinite(eps):
        raise DataError(f"ridge must be a finite nonnegative number, got {eps}")

    gram = Z.T @ Z
    penalty = np.full(Z.shape[1], eps)
    if free_bias:
        penalty[-1] = 0.0
    A = gram + np.diag(penalty)
    B = Z.T @ P
    try:
        factor = linalg.cho_factor(A, lower=False, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"ridge system is singular (eps={eps:g})") from exc
    diag = np.abs(np.diag(factor[0]))
    if eps == 0 and diag.min() ** 2 <= A.shape[0] * np.finfo(float).eps * diag.max() ** 2:
        raise NumericalError("ridge system is singular (eps=0)")
    W = linalg.cho_solve(factor, B, check_finite=False)
    scale = max(np.abs(A).max() * np.abs(W).max(), np.abs(B).max(), 1.0)
    resid = np.abs(A @ W - B).max()
    if not np.isfinite(resid) or resid > RESIDUAL_TOL * scale:
        raise NumericalError(f"ridge solve residual {resid:.3g} exceeds tolerance")
    return ReadoutModel(W, eps, free_bias)


def predict(model: ReadoutModel, z) -> np.ndarray:
    """Readout for one projected state (length D) or a batch (``N x D``)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != model.n_components:
        raise DataError(f"state has {z.shape[-1]} components, readout expects {model.n_components}")
    out = augment(z) @ model.weights
    return out[0] if z.ndim == 1 else out
