import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floor_prc.dataset import WaveformRecord
from floor_prc.detect import (DetectionConfig, composite_signal, detect_events, detect_record,
                              smooth, trailing_max)
from floor_prc.errors import ConfigError, DataError

from conftest import make_layout

FS = 1024.0


def pulse_record(times_s, amps=None, n_sensors=4, duration_s=4.0, noise=0.0, seed=0):
    """Decaying 40 Hz bursts starting at ``times_s`` on every channel."""
    n = int(duration_s * FS)
    t = np.arange(n) / FS
    a = np.zeros((n, n_sensors))
    amps = np.ones(len(times_s)) if amps is None else amps
    for t0, amp in zip(times_s, amps):
        dt = t - t0
        on = dt >= 0
        burst = np.where(on, amp * np.exp(-dt * 60) * np.sin(2 * np.pi * 40 * dt), 0.0)
        a += burst[:, None] * np.linspace(1.0, 0.5, n_sensors)
    rng = np.random.default_rng(seed)
    a += noise * rng.standard_normal(a.shape)
    return WaveformRecord(make_layout(n_sensors, FS), a)


def test_zero_record_gives_zero_signal():
    rec = WaveformRecord(make_layout(3), np.zeros((50, 3)))
    assert np.all(composite_signal(rec) == 0)


def test_constant_single_sensor():
    rec = WaveformRecord(make_layout(1), np.full((20, 1), -2.5))
    assert np.all(composite_signal(rec) == 2.5)


def test_two_sensor_row():
    rec = WaveformRecord(make_layout(2), np.array([[3.0, -4.0]]))
    assert composite_signal(rec)[0] == pytest.approx(3.5)


def test_empty_record():
    rec = WaveformRecord(make_layout(2), np.zeros((0, 2)))
    with pytest.raises(DataError):
        composite_signal(rec)


def test_smooth_window_one_is_identity():
    g = np.random.default_rng(0).random(30)
    assert np.array_equal(smooth(g, 1), g)


def test_smooth_constant():
    np.testing.assert_allclose(smooth(np.full(40, 1.7), 31), 1.7, rtol=0, atol=1e-14)


def test_smooth_impulse():
    np.testing.assert_allclose(smooth([0, 0, 1, 0, 0], 3), [0, 1 / 3, 1 / 3, 1 / 3, 0])


@pytest.mark.parametrize("w", [0, -3, 4, 2.5])
def test_smooth_bad_window(w):
    with pytest.raises(ConfigError):
        smooth(np.ones(10), w)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60), st.sampled_from([1, 3, 5, 7, 31]))
def test_smooth_matches_brute_force(values, w):
    g = np.array(values)
    h = w // 2
    ref = [g[max(0, i - h):i + h + 1].mean() for i in range(g.size)]
    np.testing.assert_allclose(smooth(g, w), ref, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=50), st.integers(1, 12))
def test_trailing_max_brute_force(values, h):
    g = np.array(values)
    ref = [g[max(0, i - h + 1):i + 1].max() for i in range(g.size)]
    np.testing.assert_array_equal(trailing_max(g, h), ref)


def test_flat_signal_no_events():
    assert len(detect_events(np.zeros(500), DetectionConfig(), FS)) == 0


def test_five_pulses_500ms():
    times = 0.5 + 0.5 * np.arange(5)
    rec = pulse_record(times)
    ev = detect_record(rec)
    assert len(ev) == 5
    # the smoothed composite peaks shortly after onset; compare against the noise-free peak
    g = smooth(composite_signal(rec), 31)
    for t0, s in zip(times, ev.timestamps):
        i0 = int(round(t0 * FS))
        expected = i0 + int(np.argmax(g[i0:i0 + 100]))
        assert abs(s - expected) <= 1


def test_close_pulses_merge_to_larger():
    rec = pulse_record([1.0, 1.1], amps=[0.6, 1.0])
    ev = detect_record(rec)
    assert len(ev) == 1
    assert abs(ev.timestamps[0] / FS - 1.1) < 0.05


def test_scale_invariance():
    rec = pulse_record(0.4 + 0.45 * np.arange(7), noise=0.01, seed=4)
    a = detect_record(rec)
    b = detect_record(rec.scaled(123.0))
    assert np.array_equal(a.timestamps, b.timestamps)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.3, 3.5), min_size=1, max_size=12), st.integers(0, 2**31))
def test_events_sorted_and_separated(times, seed):
    rec = pulse_record(sorted(times), noise=0.02, seed=seed)
    cfg = DetectionConfig()
    ev = detect_record(rec, cfg)
    if len(ev) > 1:
        gaps = np.diff(ev.timestamps)
        assert np.all(gaps > 0)
        assert np.all(gaps >= cfg.min_separation_s * FS - 1e-9)


def test_streaming_mode_uses_trailing_max():
    # a big strike late in the record must not hide earlier small strikes
    rec = pulse_record([0.5, 1.0, 1.5, 9.0], amps=[0.1, 0.1, 0.1, 1.0], duration_s=10.0)
    off = detect_record(rec, DetectionConfig(mode="offline"))
    on = detect_record(rec, DetectionConfig(mode="streaming", streaming_max_horizon_s=5.0))
    assert len(off) == 1
    assert len(on) == 4


@pytest.mark.parametrize("kw", [dict(threshold_fraction=0), dict(threshold_fraction=1.2),
                                dict(min_separation_s=0), dict(mode="fast"),
                                dict(smooth_window_samples=30)])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        DetectionConfig(**kw)
