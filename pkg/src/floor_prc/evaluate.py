"""Localization error metrics, spatial-bin confusion matrices and Fisher ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .dataset import WaveformRecord
from .errors import ConfigError, DataError
from .features import WindowConfig, extract_window, rms

FISHER_CAP = 1e6
X_BIN_PITCH = 1.0
Y_BIN_PITCH = 0.15


class Rmse(NamedTuple):
    total: float
    x: float
    y: float


@dataclass(frozen=True)
class Prediction:
    step: tuple
    truth: tuple
    predicted: tuple
    filtered: Optional[tuple] = None


@dataclass(frozen=True)
class BinSpec:
    axis: str
    edges: np.ndarray

    def __post_init__(self):
        e = np.array(self.edges, dtype=float)
        if self.axis not in ("x", "y"):
            raise ConfigError(f"bin axis must be 'x' or 'y', got {self.axis!r}")
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ConfigError("bin edges must be at least 2 strictly increasing values")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    def assign(self, values) -> np.ndarray:
        """Bin index of each value; out-of-range values go to the boundary bins."""
        idx = np.searchsorted(self.edges, np.asarray(values, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)

    @classmethod
    def regular(cls, axis: str, values, pitch: float) -> "BinSpec":
        """Edges at multiples of ``pitch`` covering the range of ``values``."""
        v = np.asarray(values, dtype=float)
        lo = math.floor(v.min() / pitch + 1e-9) * pitch
        n = max(1, math.ceil((v.max() - lo) / pitch - 1e-9))
        if lo + n * pitch <= v.max():
            n += 1
        return cls(axis, lo + pitch * np.arange(n + 1))


def default_bins(truth) -> tuple:
    """x bins at 1 m pitch and y bins at 0.15 m (stance width) over the labelled range."""
    t = np.asarray(truth, dtype=float).reshape(-1, 2)
    return BinSpec.regular("x", t[:, 0], X_BIN_PITCH), BinSpec.regular("y", t[:, 1], Y_BIN_PITCH)


def rmse_xy(truth, estimate) -> Rmse:
    t = np.asarray(truth, dtype=float).reshape(-1, 2)
    e = np.asarray(estimate, dtype=float).reshape(-1, 2)
    if t.shape != e.shape:
        raise DataError(f"truth {t.shape} and estimate {e.shape} differ in shape")
    if len(t) == 0:
        raise DataError("RMSE of an empty prediction set")
    ms = np.mean((e - t) ** 2, axis=0)
    # total from the per-axis mean squares so total^2 == x^2 + y^2 holds exactly
    return Rmse(math.sqrt(ms[0] + ms[1]), math.sqrt(ms[0]), math.sqrt(ms[1]))


def rmse(preds: Sequence[Prediction], which: str = "raw") -> Rmse:
    if which not in ("raw", "filtered"):
        raise ConfigError(f"which must be 'raw' or 'filtered', got {which!r}")
    if not preds:
        raise DataError("RMSE of an empty prediction set")
    truth = [p.truth for p in preds]
    if which == "raw":
        est = [p.predicted for p in preds]
    else:
        if any(p.filtered is None for p in preds):
            raise DataError("filtered positions missing")
        est = [p.filtered for p in preds]
    return rmse_xy(truth, est)


def confusion_matrix(true_values, predicted_values, bins: BinSpec) -> np.ndarray:
    """Counts with true bins along rows and predicted bins along columns."""
    t = np.asarray(true_values, dtype=float).reshape(-1)
    p = np.asarray(predicted_values, dtype=float).reshape(-1)
    if t.size == 0:
        raise DataError("confusion matrix of an empty prediction set")
    if t.shape != p.shape:
        raise DataError("true and predicted coordinates differ in length")
    counts = np.zeros((bins.n_bins, bins.n_bins), dtype=int)
    np.add.at(counts, (bins.assign(t), bins.assign(p)), 1)
    return counts


def diagonal_mass(counts) -> float:
    counts = np.asarray(counts)
    return float(np.trace(counts) / counts.sum())


def fisher_ratio(features, bin_index, cap: float = FISHER_CAP) -> np.ndarray:
    """Between-bin over within-bin scatter of each feature column.

    Within-bin variances are population variances. A zero denominator gives
    ``cap`` (or 0 when the numerator vanishes too).
    """
    f = np.asarray(features, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    c = np.asarray(bin_index).reshape(-1)
    if c.size != f.shape[0]:
        raise DataError("one bin index per step required")
    labels = np.unique(c)
    if labels.size < 2:
        raise DataError("Fisher ratio needs at least two occupied bins")
    mu = f.mean(axis=0)
    num = np.zeros(f.shape[1])
    den = np.zeros(f.shape[1])
    for lab in labels:
        fc = f[c == lab]
        num += len(fc) * (fc.mean(axis=0) - mu) ** 2
        den += len(fc) * fc.var(axis=0)
    out = np.zeros(f.shape[1])
    # relative floor: float noise in a constant column must not read as signal
    scale = np.maximum(np.abs(mu), np.abs(f).max(axis=0)) ** 2 * f.shape[0]
    tiny = 1e-24 * np.maximum(scale, np.finfo(float).tiny)
    pos = den > tiny
    out[pos] = num[pos] / den[pos]
    out[~pos & (num > tiny)] = cap
    return out


def sensor_feature(record: WaveformRecord, events, t_w: float = 0.12) -> np.ndarray:
    """Per-step, per-sensor RMS of the reservoir window (``N x N_s``)."""
    cfg = WindowConfig.for_record(record, t_w)
    idx = np.asarray(getattr(events, "timestamps", events), dtype=int)
    return np.array([rms(extract_window(record, s, cfg).T) for s in idx]).reshape(
        len(idx), record.layout.n_sensors)
