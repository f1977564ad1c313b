"""Reservoir states: the multi-sensor waveform window ending at a detected strike.

Windows are stacked column-major (all samples of the first sensor, then the
second, ...). The order is part of a trained model's contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import WaveformRecord
from .errors import ConfigError, DataError

VEC_ORDER = "column-major"


@dataclass(frozen=True)
class WindowConfig:
    t_w: float = 0.12
    sample_rate_hz: float = 1024.0
    n_sensors: int = 11

    def __post_init__(self):
        if self.length < 1:
            raise ConfigError(f"window of {self.t_w} s at {self.sample_rate_hz} Hz has no samples")
        if self.n_sensors < 1:
            raise ConfigError("window needs at least one sensor")

    @property
    def length(self) -> int:
        # tolerate representation error, e.g. 0.12 * 1000 = 119.99999999999999
        return int(math.floor(self.t_w * self.sample_rate_hz + 1e-9))

    @property
    def dim(self) -> int:
        return self.length * self.n_sensors

    @classmethod
    def for_record(cls, record: WaveformRecord, t_w: float = 0.12) -> "WindowConfig":
        return cls(t_w, record.sample_rate_hz, record.layout.n_sensors)


@dataclass(frozen=True)
class ReservoirState:
    values: np.ndarray
    normalized: bool = False
    step: Optional[tuple] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


def extract_window(record: WaveformRecord, s_k: int, cfg: WindowConfig, step=None) -> np.ndarray:
    """Rows ``s_k - l + 1 .. s_k`` of the record, all sensors (``l x N_s``)."""
    l = cfg.length
    s_k = int(s_k)
    if s_k < l - 1:
        name = f"step {step}" if step is not None else f"event at sample {s_k}"
        raise DataError(f"insufficient history for {name}: need {l - 1} samples before it")
    if s_k >= record.n_samples:
        raise DataError(f"event at sample {s_k} beyond record end ({record.n_samples})")
    if record.layout.n_sensors != cfg.n_sensors:
        raise DataError("window config sensor count does not match record")
    return record.samples[s_k - l + 1:s_k + 1]


def vectorize(window, step=None) -> ReservoirState:
    a = np.asarray(window, dtype=float)
    if a.ndim != 2:
        raise DataError("window must be an l x N_s matrix")
    return ReservoirState(a.reshape(-1, order="F").copy(), False, step)


def unvectorize(values, length: int) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(length, -1, order="F")


def rms(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.sqrt(np.mean(v**2, axis=-1))


def rms_normalize(state) -> ReservoirState:
    """Divide a state by its root-mean-square magnitude."""
    values = np.asarray(state, dtype=float)
    step = getattr(state, "step", None)
    scale = rms(values)
    if not scale > 0:
        raise DataError(f"degenerate window (zero RMS) for step {step}")
    return ReservoirState(values / scale, True, step)


def state_matrix(record: WaveformRecord, sample_indices: Sequence[int], t_w: float = 0.12,
                 normalize: bool = True, sensors: Optional[Sequence[int]] = None) -> np.ndarray:
    """Stack the reservoir states of several events into an ``N x d`` matrix.

    ``sensors`` picks column indices of the record (in the given order) before
    vectorizing.
    """
    cfg = WindowConfig.for_record(record, t_w)
    rows = []
    for s in sample_indices:
        w = extract_window(record, s, cfg)
        if sensors is not None:
            w = w[:, list(sensors)]
        rows.append(w.reshape(-1, order="F"))
    R = np.array(rows, dtype=float).reshape(len(rows), -1)
    return normalize_rows(R) if normalize else R


def normalize_rows(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    scale = rms(R)
    if np.any(~(scale > 0)):
        bad = int(np.nonzero(~(scale > 0))[0][0])
        raise DataError(f"degenerate window (zero RMS) in row {bad}")
    return R / scale[:, None]
