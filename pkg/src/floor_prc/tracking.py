"""Constant-velocity Kalman smoothing of per-step position estimates.

The filter runs in the step-index domain (one time unit per detected step),
so physical step timing never enters it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError

F = np.array([[1.0, 0.0, 1.0, 0.0],
              [0.0, 1.0, 0.0, 1.0],
              [0.0, 0.0, 1.0, 0.0],
              [0.0, 0.0, 0.0, 1.0]])
H = np.array([[1.0, 0.0, 0.0, 0.0],
              [0.0, 1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class KfConfig:
    q: float = 0.05
    r: float = 0.25
    initial_position_var: float = 1.0
    initial_velocity_var: float = 1.0

    def __post_init__(self):
        for name in ("q", "r", "initial_position_var", "initial_velocity_var"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class KfState:
    mean: np.ndarray
    covariance: np.ndarray
    step_count: int = 0

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2].copy()


def _measurement(p) -> np.ndarray:
    z = np.asarray(p, dtype=float).reshape(-1)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise DataError(f"measurement must be a finite (x, y) pair, got {p!r}")
    return z


def kf_init(first_measurement, cfg: KfConfig = KfConfig()) -> KfState:
    z = _measurement(first_measurement)
    P = np.diag([cfg.initial_position_var] * 2 + [cfg.initial_velocity_var] * 2)
    return KfState(np.array([z[0], z[1], 0.0, 0.0]), P, 0)


def kf_step(state: KfState, measurement, cfg: KfConfig = KfConfig()):
    """One predict/update cycle; returns ``(new_state, filtered_xy)``."""
    z = _measurement(measurement)
    x = F @ state.mean
    P = F @ state.covariance @ F.T + cfg.q * np.eye(4)
    S = H @ P @ H.T + cfg.r * np.eye(2)
    K = np.linalg.solve(S, H @ P).T
    x = x + K @ (z - H @ x)
    P = (np.eye(4) - K @ H) @ P
    P = 0.5 * (P + P.T)
    if not np.all(np.isfinite(P)) or np.linalg.eigvalsh(P).min() <= 0:
        raise NumericalError("Kalman covariance lost positive definiteness")
    new = KfState(x, P, state.step_count + 1)
    return new, x[:2].copy()


def filter_track(measurements, cfg: KfConfig = KfConfig()) -> np.ndarray:
    """Filter an ``N x 2`` sequence of step positions; the first is passed through."""
    m = np.asarray(measurements, dtype=float).reshape(-1, 2)
    out = np.empty_like(m)
    if len(m) == 0:
        return out
    state = kf_init(m[0], cfg)
    out[0] = m[0]
    for k in range(1, len(m)):
        state, out[k] = kf_step(state, m[k], cfg)
    return out
