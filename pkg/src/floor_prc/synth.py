"""Synthetic floor-vibration campaigns from a simply supported plate model.

Each foot strike is an ideal impulse. The acceleration at a sensor is the
modal sum

    a(t) = I * sum_mn phi_mn(src) phi_mn(sensor) w_mn^p exp(-z w_mn t) sin(w_d t)

for ``t >= 0`` after the strike, with
``phi_mn(x, y) = sin(m pi (x - x_min) / Lx) sin(n pi (y - y_min) / Ly)``, thin-plate
dispersion ``w_mn = c ((m pi / Lx)^2 + (n pi / Ly)^2)`` and a participation
exponent ``p`` (default -1). The model is linear in the impulse and
reciprocal in source and sensor position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import FootstepLabel, LabeledDataset, SensorLayout, WaveformRecord
from .errors import ConfigError, DataError

SAMPLE_RATE_HZ = 1024.0
LEAD_S = 1.0
PEAK_SPAN_S = 0.3
TAIL_S = 1.0
MIN_CADENCE_WINDOWS = 2.0
DECAY_CUTOFF = 1e-9
LAYOUT_SEED = 20_240_611


@dataclass(frozen=True)
class FloorConfig:
    Lx: float = 19.0
    Ly: float = 3.0
    x_min: float = -1.0
    y_min: float = 0.0
    n_modes_x: int = 12
    n_modes_y: int = 4
    damping: float = 0.1
    fundamental_hz: float = 15.0
    coefficient: Optional[float] = None
    participation_exponent: float = -1.0


@dataclass(frozen=True)
class FloorModel:
    Lx: float
    Ly: float
    modes: np.ndarray  # rows (m, n, omega, zeta), omega ascending
    coefficient: float
    x_min: float = 0.0
    y_min: float = 0.0
    participation_exponent: float = -1.0
    boundary: str = "simply-supported"

    @property
    def participation(self) -> np.ndarray:
        return self.modes[:, 2] ** self.participation_exponent

    @property
    def omega(self) -> np.ndarray:
        return self.modes[:, 2]

    def contains(self, x, y) -> bool:
        u = np.asarray(x) - self.x_min
        v = np.asarray(y) - self.y_min
        return bool(np.all((0 < u) & (u < self.Lx) & (0 < v) & (v < self.Ly)))

    def mode_shapes(self, xy) -> np.ndarray:
        """``P x n_modes`` mode-shape values at ``P`` points."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        m, n = self.modes[:, 0], self.modes[:, 1]
        return (np.sin(np.pi * np.outer(xy[:, 0] - self.x_min, m) / self.Lx)
                * np.sin(np.pi * np.outer(xy[:, 1] - self.y_min, n) / self.Ly))


@dataclass(frozen=True)
class GaitProfile:
    impulse_mean: float = 1.0
    impulse_jitter: float = 0.1
    step_length: float = 0.62
    stance_width: float = 0.15
    cadence_s: float = 0.55
    placement_jitter: float = 0.03
    cadence_jitter: float = 0.05

    def __post_init__(self):
        vals = (self.impulse_mean, self.impulse_jitter, self.step_length, self.stance_width,
                self.cadence_s, self.placement_jitter, self.cadence_jitter)
        if any(not (np.isfinite(v) and v > 0) for v in vals):
            raise ConfigError("gait parameters must be positive")
        if max(self.impulse_jitter, self.cadence_jitter) >= 0.5:
            raise ConfigError("relative jitters must be below 0.5")
        if self.placement_jitter >= 0.5:
            raise ConfigError("placement jitter must be below 0.5 m")


@dataclass(frozen=True)
class TraversalPlan:
    y_offset: float
    x_start: float
    x_end: float
    direction: int = 1
    subject: str = "S1"
    traversal: str = "Tr1"

    def __post_init__(self):
        if self.x_start == self.x_end:
            raise ConfigError("traversal start and end coincide")
        if self.direction not in (1, -1):
            raise ConfigError("direction must be +1 or -1")


@dataclass(frozen=True)
class Strike:
    t: float
    x: float
    y: float
    impulse: float


def build_floor(cfg: FloorConfig = FloorConfig()) -> FloorModel:
    if not (cfg.Lx > 0 and cfg.Ly > 0):
        raise ConfigError("plate dimensions must be positive")
    if cfg.n_modes_x < 1 or cfg.n_modes_y < 1:
        raise ConfigError("need at least one mode in each direction")
    if not 0 < cfg.damping < 1:
        raise ConfigError("damping ratio must be in (0, 1)")
    m, n = np.meshgrid(np.arange(1, cfg.n_modes_x + 1), np.arange(1, cfg.n_modes_y + 1),
                       indexing="ij")
    m, n = m.ravel().astype(float), n.ravel().astype(float)
    k2 = (m * np.pi / cfg.Lx) ** 2 + (n * np.pi / cfg.Ly) ** 2
    c = cfg.coefficient
    if c is None:
        c = 2 * np.pi * cfg.fundamental_hz / k2.min()
    if not c > 0:
        raise ConfigError("dispersion coefficient must be positive")
    omega = c * k2
    order = np.lexsort((n, m, omega))
    modes = np.column_stack([m, n, omega, np.full(m.size, cfg.damping)])[order]
    return FloorModel(cfg.Lx, cfg.Ly, modes, float(c), cfg.x_min, cfg.y_min,
                      cfg.participation_exponent)


def corridor_layout(floor_cfg: FloorConfig = FloorConfig(), n_sensors: int = 11,
                    x_range=(1.0, 16.0), jitter: float = 0.4,
                    sample_rate_hz: float = SAMPLE_RATE_HZ) -> SensorLayout:
    """Sensors on the corridor centerline at irregular (fixed-jitter) x positions."""
    rng = np.random.default_rng(LAYOUT_SEED)
    x = np.linspace(x_range[0], x_range[1], n_sensors)
    if n_sensors > 1:
        x = x + rng.uniform(-jitter, jitter, n_sensors)
    y = np.full(n_sensors, floor_cfg.y_min + floor_cfg.Ly / 2)
    ids = tuple(f"A{j + 1:02d}" for j in range(n_sensors))
    return SensorLayout(ids, np.column_stack([x, y]), sample_rate_hz)


def modal_response(floor: FloorModel, layout: SensorLayout, strikes: Sequence[Strike],
                   n_samples: int) -> np.ndarray:
    """Noise-free ``n_samples x N_s`` acceleration for a sequence of strikes."""
    fs = layout.sample_rate_hz
    omega, zeta = floor.modes[:, 2], floor.modes[:, 3]
    pole = -zeta * omega + 1j * omega * np.sqrt(1 - zeta**2)
    horizon = min(n_samples, int(math.ceil(-math.log(DECAY_CUTOFF) / (zeta * omega).min() * fs)))
    # exp(pole * j / fs) on the sample grid; a strike between samples adds a phase factor
    grid = np.exp(np.outer(np.arange(horizon) / fs, pole))
    sensor_shapes = floor.mode_shapes(layout.positions)  # N_s x M
    weight = floor.participation
    out = np.zeros((n_samples, layout.n_sensors))
    for s in strikes:
        i0 = int(math.ceil(s.t * fs - 1e-9))
        if i0 >= n_samples:
            continue
        first = max(i0, 0)
        i1 = min(n_samples, i0 + horizon)
        offset = i0 / fs - s.t
        modal = (grid[first - i0:i1 - i0] * np.exp(pole * offset)).imag * weight
        gain = floor.mode_shapes([(s.x, s.y)])[0] * sensor_shapes
        out[first:i1] += s.impulse * (modal @ gain.T)
    return out


def plan_strikes(plan: TraversalPlan, gait: GaitProfile, rng: np.random.Generator,
                 n_steps: Optional[int] = None) -> list:
    """Marked strike positions along one walking line with jittered timing and force."""
    span = abs(plan.x_end - plan.x_start)
    if n_steps is None:
        n_steps = int(math.floor(span / gait.step_length + 1e-9)) + 1
    lo = min(plan.x_start, plan.x_end)
    marks = lo + gait.step_length * np.arange(n_steps)
    if plan.direction < 0:
        marks = marks[::-1]
    foot = np.where(np.arange(n_steps) % 2 == 0, -0.5, 0.5) * gait.stance_width
    x = marks + gait.placement_jitter * rng.standard_normal(n_steps)
    y = plan.y_offset + foot + gait.placement_jitter * rng.standard_normal(n_steps)
    periods = gait.cadence_s * (1 + gait.cadence_jitter * rng.standard_normal(n_steps))
    t = LEAD_S + np.concatenate([[0.0], np.cumsum(periods[1:])])
    impulse = gait.impulse_mean * (1 + gait.impulse_jitter * rng.standard_normal(n_steps))
    return [Strike(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(t, x, y, impulse)]


def simulate_strikes(floor: FloorModel, layout: SensorLayout, strikes: Sequence[Strike],
                     subject: str = "S1", traversal: str = "Tr1", noise_std: float = 0.0,
                     rng: Optional[np.random.Generator] = None,
                     duration_s: Optional[float] = None) -> LabeledDataset:
    if not floor.contains(layout.positions[:, 0], layout.positions[:, 1]):
        raise DataError("sensor outside the plate")
    xs = np.array([[s.x, s.y] for s in strikes]).reshape(-1, 2)
    if len(strikes) and not floor.contains(xs[:, 0], xs[:, 1]):
        raise DataError("strike outside the plate")
    fs = layout.sample_rate_hz
    if duration_s is None:
        duration_s = (max(s.t for s in strikes) if strikes else 0.0) + TAIL_S
    n = int(math.ceil(duration_s * fs))
    a = modal_response(floor, layout, strikes, n)
    if noise_std > 0:
        if rng is None:
            raise ConfigError("noise requires a random generator")
        a = a + noise_std * rng.standard_normal(a.shape)
    labels = [FootstepLabel(k, s.t, s.x, s.y, subject, traversal) for k, s in enumerate(strikes)]
    return LabeledDataset(WaveformRecord(layout, a, 0.0), tuple(labels))


def simulate_traversal(floor: FloorModel, plan: TraversalPlan, gait: GaitProfile,
                       layout: SensorLayout, noise_std: float = 0.0, seed=0,
                       n_steps: Optional[int] = None,
                       window_s: float = 0.12) -> LabeledDataset:
    """Simulate one walk; gait jitter and sensor noise use independent streams of ``seed``."""
    if gait.cadence_s < MIN_CADENCE_WINDOWS * window_s:
        raise DataError(f"cadence {gait.cadence_s} s shorter than twice the {window_s} s window")
    gait_ss, noise_ss = _streams(seed)
    strikes = plan_strikes(plan, gait, np.random.default_rng(gait_ss), n_steps)
    return simulate_strikes(floor, layout, strikes, plan.subject, plan.traversal, noise_std,
                            np.random.default_rng(noise_ss))


@dataclass(frozen=True)
class CampaignConfig:
    floor: FloorConfig = FloorConfig()
    n_sensors: int = 11
    subjects: tuple = ("S1", "S2")
    n_traversals: int = 6
    n_steps: int = 27
    x_start: float = 0.3
    line_offsets: tuple = (-0.3, 0.0, 0.3)
    noise_fraction: float = 0.01
    gaits: dict = field(default_factory=lambda: {
        "S1": GaitProfile(impulse_mean=1.0, cadence_s=0.55),
        "S2": GaitProfile(impulse_mean=1.6, cadence_s=0.62),
    })


def campaign_plans(cfg: CampaignConfig = CampaignConfig()) -> list:
    """Traversal plans: lines cycle per traversal, direction alternates (walk, turn, return)."""
    gait_len = cfg.gaits[cfg.subjects[0]].step_length if cfg.subjects else 0.62
    x_end = cfg.x_start + gait_len * (cfg.n_steps - 1)
    plans = []
    for subject in cfg.subjects:
        for i in range(cfg.n_traversals):
            plans.append(TraversalPlan(
                cfg.floor.y_min + cfg.floor.Ly / 2 + cfg.line_offsets[i % len(cfg.line_offsets)],
                cfg.x_start, x_end, 1 if i % 2 == 0 else -1, subject, f"Tr{i + 1}"))
    return plans


def default_campaign(seed=42, cfg: CampaignConfig = CampaignConfig()) -> list:
    """Two subjects x six traversals x 27 steps on a corridor-like plate.

    Sensor noise is ``noise_fraction`` times the campaign median of the
    noise-free peak amplitude, taken per footstep and sensor (see
    :func:`footstep_peaks`).
    """
    floor = build_floor(cfg.floor)
    layout = corridor_layout(cfg.floor, cfg.n_sensors)
    plans = campaign_plans(cfg)
    seeds = np.random.SeedSequence(seed).spawn(len(plans))
    clean = [simulate_traversal(floor, p, _gait(cfg, p.subject), layout, 0.0, s, cfg.n_steps)
             for p, s in zip(plans, seeds)]
    if cfg.noise_fraction <= 0:
        return clean
    peaks = np.concatenate([footstep_peaks(d) for d in clean])
    noise_std = cfg.noise_fraction * float(np.median(peaks))
    out = []
    for ds, s in zip(clean, seeds):
        rng = np.random.default_rng(_streams(s)[1])
        a = ds.record.samples + noise_std * rng.standard_normal(ds.record.samples.shape)
        out.append(LabeledDataset(replace(ds.record, samples=a), ds.labels))
    return out


def footstep_peaks(ds: LabeledDataset, span_s: float = PEAK_SPAN_S) -> np.ndarray:
    """Peak |a| of each sensor within ``span_s`` after each labelled strike, flattened."""
    fs = ds.record.sample_rate_hz
    a = np.abs(ds.record.samples)
    n = max(1, int(round(span_s * fs)))
    out = []
    for lab in ds.labels:
        i = int(np.ceil((lab.timestamp_s - ds.record.start_time_s) * fs - 1e-9))
        seg = a[i:i + n]
        if len(seg):
            out.append(seg.max(axis=0))
    if not out:
        raise DataError("no labelled strike inside the record")
    return np.concatenate(out)


def _streams(seed) -> list:
    # rebuilt from entropy/spawn_key so repeated calls give the same children
    if isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        seed = np.random.SeedSequence(seed)
    return seed.spawn(2)


def _gait(cfg: CampaignConfig, subject: str) -> GaitProfile:
    try:
        return cfg.gaits[subject]
    except KeyError:
        raise ConfigError(f"no gait profile for subject {subject!r}") from None
