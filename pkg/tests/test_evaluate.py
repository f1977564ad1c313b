import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from floor_prc.errors import ConfigError, DataError
from floor_prc.evaluate import (BinSpec, Prediction, confusion_matrix, default_bins,
                                diagonal_mass, fisher_ratio, rmse, rmse_xy, sensor_feature)

from conftest import make_record
from oracles import fisher_loop, rmse_loop


def test_zero_error():
    t = np.random.default_rng(0).random((5, 2))
    assert tuple(rmse_xy(t, t)) == (0, 0, 0)


def test_hand_rmse():
    r = rmse_xy([(0, 0), (0, 0)], [(0.3, 0.4), (0, 0)])
    assert r.x == pytest.approx(0.2121, abs=1e-4)
    assert r.y == pytest.approx(0.2828, abs=1e-4)
    assert r.total == pytest.approx(0.3536, abs=1e-4)


def test_total_from_axis_values():
    # constant per-axis errors of 1.39 m and 0.35 m combine to 1.43 m
    r = rmse_xy(np.zeros((4, 2)), np.tile([1.39, 0.35], (4, 1)))
    assert (r.x, r.y) == pytest.approx((1.39, 0.35))
    assert r.total == pytest.approx(1.43, abs=0.005)


def test_rmse_empty():
    with pytest.raises(DataError):
        rmse_xy(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(DataError):
        rmse([])


def test_rmse_prediction_objects():
    preds = [Prediction(("S1", "Tr1", 0), (1.0, 1.0), (1.5, 1.0), (1.2, 1.0)),
             Prediction(("S1", "Tr1", 1), (2.0, 1.0), (2.0, 1.3), (2.0, 1.1))]
    assert rmse(preds).x == pytest.approx(np.sqrt(0.125))
    assert rmse(preds, "filtered").y == pytest.approx(np.sqrt(0.005))
    with pytest.raises(DataError):
        rmse([Prediction((), (0, 0), (0, 0))], "filtered")


finite_xy = hnp.arrays(np.float64, st.tuples(st.integers(1, 40), st.just(2)),
                       elements=st.floats(-50, 50))


@settings(max_examples=100, deadline=None)
@given(finite_xy, st.data())
def test_pythagorean_identity_and_oracle(t, data):
    e = data.draw(hnp.arrays(np.float64, t.shape, elements=st.floats(-50, 50)))
    r = rmse_xy(t, e)
    assert abs(r.total**2 - (r.x**2 + r.y**2)) <= 1e-12 * max(1.0, r.total**2)
    np.testing.assert_allclose(tuple(r), rmse_loop(t, e), rtol=1e-9, atol=1e-12)


def test_confusion_cases():
    bins = BinSpec("x", [0, 1, 2])
    assert confusion_matrix([0.5, 1.5], [0.5, 1.5], bins).tolist() == [[1, 0], [0, 1]]
    c = confusion_matrix([0.5, 1.5, 1.2], [1.7, 1.1, 1.9], bins)
    assert c.tolist() == [[0, 1], [0, 2]]
    c = confusion_matrix([0.2, 0.6, 1.4], [0.1, 1.3, 1.6], bins)
    assert c.tolist() == [[1, 1], [0, 1]]
    assert diagonal_mass(c) == pytest.approx(2 / 3)
    with pytest.raises(DataError):
        confusion_matrix([], [], bins)


def test_confusion_clamps_out_of_range():
    bins = BinSpec("y", [0, 0.15, 0.3])
    assert confusion_matrix([0.1, 0.2], [-5.0, 9.0], bins).tolist() == [[1, 0], [0, 1]]


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.integers(1, 60), elements=st.floats(-5, 25)), st.data())
def test_confusion_conserves_count(t, data):
    p = data.draw(hnp.arrays(np.float64, t.shape, elements=st.floats(-50, 50)))
    bx, _ = default_bins(np.column_stack([t, np.zeros_like(t)]))
    assert confusion_matrix(t, p, bx).sum() == t.size
    assert confusion_matrix(t, t, bx).trace() == t.size


def test_regular_bins_cover_range():
    b = BinSpec.regular("x", [0.3, 16.7], 1.0)
    assert b.edges[0] <= 0.3 and b.edges[-1] > 16.7
    np.testing.assert_allclose(np.diff(b.edges), 1.0)
    with pytest.raises(ConfigError):
        BinSpec("z", [0, 1])
    with pytest.raises(ConfigError):
        BinSpec("x", [1, 1])


def test_fisher_cases():
    assert fisher_ratio([2.0, 2.0, 2.0, 2.0], [0, 0, 1, 1])[0] == 0
    assert fisher_ratio([0, 0.1, 1, 1.1], [0, 0, 1, 1])[0] == pytest.approx(100)
    assert fisher_ratio([0, 0, 1, 1], [0, 0, 1, 1])[0] == 1e6
    with pytest.raises(DataError):
        fisher_ratio([1, 2, 3], [0, 0, 0])


def test_fisher_noise_low():
    rng = np.random.default_rng(0)
    j = fisher_ratio(rng.standard_normal(1000), rng.integers(0, 5, 1000))[0]
    assert j < 0.1


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 60), st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), st.floats(-10, 10),
       st.integers(0, 2**31))
def test_fisher_affine_invariance_and_oracle(n, a, b, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(n)
    c = np.arange(n) % 3
    j = fisher_ratio(f, c)[0]
    assert fisher_ratio(a * f + b, c)[0] == pytest.approx(j, rel=1e-9)
    assert j == pytest.approx(fisher_loop(f, c), rel=1e-9)


def test_sensor_feature_matches_window_rms():
    rec = make_record(600, 11)
    F = sensor_feature(rec, [200, 400])
    w = rec.samples[400 - 121:401]
    np.testing.assert_allclose(F[1], np.sqrt((w**2).mean(axis=0)))
    assert sensor_feature(rec, [300]).shape == (1, 11)
