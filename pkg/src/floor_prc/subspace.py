"""PCA compression of reservoir states.

The covariance is taken literally as ``R.T @ R / (N - 1)`` unless centering is
requested. Eigenpairs come from a thin SVD of the (optionally centered) state
matrix, which is much cheaper than the ``d x d`` eigenproblem when ``N << d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError

EIG_CLIP = 1e-12


def _frozen(a) -> np.ndarray:
    # C order always, so a reloaded model multiplies through the same BLAS path
    a = np.array(a, dtype=float, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PcaModel:
    """Principal directions and eigenvalue spectrum of a training state matrix.

    Attributes:
        directions: ``d x k`` matrix with orthonormal columns, sorted by
            decreasing eigenvalue. ``k`` may be smaller than the full rank
            after :meth:`truncate`.
        eigenvalues: full non-increasing spectrum (length ``r_full``).
        mean: training mean (only when ``centering`` is set).
        centering: whether states are mean-centered before projection.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    mean: Optional[np.ndarray] = None
    centering: bool = False

    def __post_init__(self):
        object.__setattr__(self, "directions", _frozen(self.directions))
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        if self.mean is not None:
            object.__setattr__(self, "mean", _frozen(self.mean))
        if self.directions.ndim != 2:
            raise DataError("PCA directions must be a matrix")
        if self.directions.shape[1] > self.eigenvalues.size:
            raise DataError("more PCA directions than eigenvalues")
        if self.centering and (self.mean is None or self.mean.shape != (self.d,)):
            raise DataError("centered PCA model requires a mean of length d")

    @property
    def d(self) -> int:
        return self.directions.shape[0]

    @property
    def r_full(self) -> int:
        return self.eigenvalues.size

    @property
    def n_components(self) -> int:
        return self.directions.shape[1]

    def truncate(self, n_components: int) -> "PcaModel":
        """Keep the first ``n_components`` directions (the spectrum is kept whole)."""
        if not 1 <= n_components <= self.n_components:
            raise ConfigError(
                f"D={n_components} out of range 1..{self.n_components}")
        return PcaModel(self.directions[:, :n_components], self.eigenvalues,
                        self.mean, self.centering)


def _fix_signs(v: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def fit_pca(states, centering: bool = False) -> PcaModel:
    """Fit PCA on an ``N x d`` matrix of reservoir states.

    Returns ``min(N, d)`` directions with eigenvalues ``s**2 / (N - 1)`` where
    ``s`` are the singular values of the (optionally centered) state matrix.
    """
    R = np.asarray(states, dtype=float)
    if R.ndim != 2:
        raise DataError("states must be an N x d matrix")
    n = R.shape[0]
    if n < 2:
        raise DataError(f"PCA needs at least 2 states, got {n}")
    if not np.all(np.isfinite(R)):
        raise DataError("non-finite entries in state matrix")
    mean = R.mean(axis=0) if centering else None
    Rc = R - mean if centering else R
    _, s, vt = np.linalg.svd(Rc, full_matrices=False)
    lam = s**2 / (n - 1)
    lam[(lam < 0) & (lam >= -EIG_CLIP)] = 0.0
    return PcaModel(_fix_signs(vt.T), lam, mean, centering)


def project(model: PcaModel, states, n_components: Optional[int] = None) -> np.ndarray:
    """Project one state (length d) or a batch (``N x d``) onto the first D directions."""
    D = model.n_components if n_components is None else int(n_components)
    if not 1 <= D <= model.n_components:
        raise ConfigError(f"D={D} out of range 1..{model.n_components}")
    r = np.asarray(states, dtype=float)
    if r.shape[-1] != model.d:
        raise DataError(f"state length {r.shape[-1]} does not match PCA dimension {model.d}")
    if model.centering:
        r = r - model.mean
    return r @ model.directions[:, :D]


def reconstruct(model: PcaModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    D = z.shape[-1]
    r = z @ model.directions[:, :D].T
    return r + model.mean if model.centering else r


def variance_retained(model: PcaModel, n_components: int) -> float:
    """Fraction of the eigenvalue mass held by the first ``n_components`` directions."""
    if not 1 <= n_components <= model.r_full:
        raise ConfigError(f"D={n_components} out of range 1..{model.r_full}")
    return float(eta_curve(model)[n_components - 1])


def eta_curve(model: PcaModel) -> np.ndarray:
    """Retained-variance curve for D = 1..r_full."""
    cum = np.cumsum(model.eigenvalues)
    if cum[-1] <= 0:
        raise DataError("zero variance")
    # dividing by the last partial sum makes eta exactly 1 once the spectrum is exhausted
    return np.minimum(cum / cum[-1], 1.0)


def choose_dimension(model: PcaModel, eta_target: float) -> int:
    """Smallest D with retained variance at least ``eta_target``."""
    if not 0 < eta_target <= 1:
        raise ConfigError(f"eta target must be in (0, 1], got {eta_target}")
    eta = eta_curve(model)
    hits = np.nonzero(eta >= eta_target)[0]
    if hits.size == 0:
        return model.r_full
    return int(hits[0]) + 1
