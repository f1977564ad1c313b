"""Foot-strike detection from the sensor-averaged absolute acceleration.

The composite signal is smoothed with a centered moving average; events are
local maxima above a fraction of the signal maximum, thinned so that no two
kept events are closer than the minimum separation (larger peaks win).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.signal import find_peaks

from .dataset import WaveformRecord
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class DetectionConfig:
    smooth_window_samples: int = 31
    threshold_fraction: float = 0.2
    min_separation_s: float = 0.2
    mode: str = "offline"
    streaming_max_horizon_s: float = 5.0

    def __post_init__(self):
        w = self.smooth_window_samples
        if int(w) != w or w < 1 or w % 2 == 0:
            raise ConfigError(f"smoothing window must be an odd positive integer, got {w}")
        if not 0 < self.threshold_fraction < 1:
            raise ConfigError(f"threshold fraction must be in (0, 1), got {self.threshold_fraction}")
        if not self.min_separation_s > 0:
            raise ConfigError("minimum separation must be positive")
        if self.mode not in ("offline", "streaming"):
            raise ConfigError(f"unknown detection mode {self.mode!r}")
        if not self.streaming_max_horizon_s > 0:
            raise ConfigError("streaming horizon must be positive")


@dataclass(frozen=True)
class EventList:
    """Detected strikes as sample indices with the smoothed signal value at each."""

    timestamps: np.ndarray
    peak_values: np.ndarray

    def __len__(self):
        return len(self.timestamps)


def composite_signal(record: WaveformRecord) -> np.ndarray:
    """Mean absolute acceleration across sensors, one value per sample."""
    if record.n_samples == 0:
        raise DataError("empty record")
    return np.abs(record.samples).mean(axis=1)


def smooth(g, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks at the edges."""
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ConfigError(f"smoothing window must be an odd positive integer, got {window}")
    g = np.asarray(g, dtype=float)
    if window == 1 or g.size == 0:
        return g.copy()
    half = window // 2
    c = np.concatenate([[0.0], np.cumsum(g)])
    i = np.arange(g.size)
    lo = np.maximum(i - half, 0)
    hi = np.minimum(i + half + 1, g.size)
    return (c[hi] - c[lo]) / (hi - lo)


def trailing_max(g, horizon: int) -> np.ndarray:
    """Running maximum over the last ``horizon`` samples (inclusive of the current one)."""
    g = np.asarray(g, dtype=float)
    if horizon <= 1:
        return g.copy()
    # shift the window so it covers [i - horizon + 1, i]
    return maximum_filter1d(g, size=horizon, origin=(horizon - 1) // 2, mode="nearest")


def detect_events(g_smoothed, cfg: DetectionConfig, sample_rate_hz: float) -> EventList:
    g = np.asarray(g_smoothed, dtype=float)
    empty = EventList(np.zeros(0, dtype=int), np.zeros(0))
    if g.size < 3:
        return empty
    if cfg.mode == "offline":
        level = np.full(g.size, g.max())
    else:
        level = trailing_max(g, int(round(cfg.streaming_max_horizon_s * sample_rate_hz)))
    threshold = cfg.threshold_fraction * level
    distance = max(1, int(np.ceil(cfg.min_separation_s * sample_rate_hz - 1e-9)))
    peaks, _ = find_peaks(g)
    peaks = peaks[g[peaks] > threshold[peaks]]
    if peaks.size == 0:
        return empty
    # thinning after the threshold so sub-threshold ripples cannot suppress real peaks
    keep = _thin_by_height(peaks, g[peaks], distance)
    return EventList(keep, g[keep])


def _thin_by_height(peaks: np.ndarray, heights: np.ndarray, distance: int) -> np.ndarray:
    order = np.argsort(-heights, kind="stable")
    kept = []
    for i in order:
        p = peaks[i]
        if all(abs(p - q) >= distance for q in kept):
            kept.append(p)
    return np.array(sorted(kept), dtype=int)


def detect_record(record: WaveformRecord, cfg: DetectionConfig = DetectionConfig()) -> EventList:
    g = smooth(composite_signal(record), cfg.smooth_window_samples)
    return detect_events(g, cfg, record.sample_rate_hz)
