import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floor_prc.errors import DataError, NumericalError
from floor_prc.readout import ReadoutModel, augment, default_ridge, predict, train_ridge

from oracles import ridge_by_solve, ridge_objective


def system(N, D, seed=0):
    rng = np.random.default_rng(seed)
    return augment(rng.standard_normal((N, D))), rng.standard_normal((N, 2))


def test_orthonormal_columns_zero_ridge():
    # columns orthonormal and orthogonal to the bias column: W = Q^T P, bias = mean(P)
    rng = np.random.default_rng(1)
    A = rng.standard_normal((30, 5))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    Z = augment(Q)
    P = rng.standard_normal((30, 2))
    W = train_ridge(Z, P, ridge=0.0).weights
    np.testing.assert_allclose(W[:-1], Q.T @ P, atol=1e-12)
    np.testing.assert_allclose(W[-1], P.mean(axis=0), atol=1e-12)


def test_large_ridge_shrinks():
    Z, P = system(40, 6)
    W = train_ridge(Z, P, ridge=1e9).weights
    assert np.max(np.abs(W)) <= 1e-6


def test_random_50x20_oracle():
    Z, P = system(50, 20, 7)
    W = train_ridge(Z, P, ridge=1e-3).weights
    ref = ridge_by_solve(Z, P, 1e-3)
    assert np.max(np.abs(W - ref)) / np.max(np.abs(ref)) <= 1e-8


def test_free_bias_oracle():
    Z, P = system(30, 4, 8)
    P = P + 50
    W = train_ridge(Z, P, ridge=0.5, free_bias=True).weights
    np.testing.assert_allclose(W, ridge_by_solve(Z, P, 0.5, free_bias=True), rtol=1e-9)


def test_default_ridge_scale():
    Z, P = system(30, 4, 9)
    m = train_ridge(Z, P)
    assert m.ridge == pytest.approx(1e-6 * np.trace(Z.T @ Z) / Z.shape[1])
    assert m.ridge == pytest.approx(default_ridge(Z))


def test_singular_at_zero_ridge():
    Z = augment(np.zeros((6, 2)))
    with pytest.raises(NumericalError, match="singular"):
        train_ridge(Z, np.ones((6, 2)), ridge=0.0)


def test_non_finite_inputs():
    Z, P = system(10, 2)
    P[0, 0] = np.inf
    with pytest.raises(DataError):
        train_ridge(Z, P)


def test_missing_bias_column():
    Z, P = system(10, 2)
    with pytest.raises(DataError):
        train_ridge(Z[:, :-1], P)


def test_predict_cases():
    assert predict(ReadoutModel(np.zeros((3, 2)), 0.0), [1.0, 2.0]).tolist() == [0, 0]
    W = np.zeros((3, 2))
    W[-1] = (0.3, -0.7)
    np.testing.assert_allclose(predict(ReadoutModel(W, 0.0), [5.0, 9.0]), [0.3, -0.7])
    W = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    np.testing.assert_allclose(predict(ReadoutModel(W, 0.0), [2.0, 3.0]), [2.5, 3.5])
    np.testing.assert_allclose(predict(ReadoutModel(W, 0.0), [[2.0, 3.0], [0, 0]]),
                               [[2.5, 3.5], [0.5, 0.5]])
    with pytest.raises(DataError):
        predict(ReadoutModel(W, 0.0), [1.0, 2.0, 3.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(5, 100), st.integers(1, 30), st.floats(-6, 0), st.integers(0, 2**31))
def test_oracle_property(N, D, log_eps, seed):
    Z, P = system(N, D, seed)
    eps = 10.0**log_eps
    W = train_ridge(Z, P, ridge=eps).weights
    ref = ridge_by_solve(Z, P, eps)
    assert np.max(np.abs(W - ref)) <= 1e-8 * max(np.max(np.abs(ref)), 1e-300) or \
        np.linalg.cond(Z.T @ Z + eps * np.eye(D + 1)) > 1e7


@settings(max_examples=15, deadline=None)
@given(st.integers(5, 60), st.integers(1, 15), st.floats(-6, 0), st.integers(0, 2**31))
def test_training_loss_optimality(N, D, log_eps, seed):
    Z, P = system(N, D, seed)
    eps = 10.0**log_eps
    W = train_ridge(Z, P, ridge=eps).weights
    base = ridge_objective(Z, P, W, eps)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        dW = rng.standard_normal(W.shape)
        dW *= 1e-3 / np.linalg.norm(dW)
        assert ridge_objective(Z, P, W + dW, eps) >= base - 1e-12 * max(base, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31))
def test_interpolation(N, seed):
    D = N + 3
    Z, P = system(N, D, seed)
    W = train_ridge(Z, P, ridge=1e-12).weights
    np.testing.assert_allclose(Z @ W, P, atol=1e-6)
