import numpy as np
import pytest
from hypothesis import given, strategies as st

from bait.errors import ConfigError
from bait.models import (
    LinearModel,
    accuracy,
    cross_entropy,
    cross_entropy_grad,
    mse,
    one_hot,
    onehot_accuracy,
    softmax,
)


def _fd_grad(W, X, y, h=1e-6):
    G = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        G[idx] = (cross_entropy(W + E, X, y) - cross_entropy(W - E, X, y)) / (2 * h)
    return G


def test_gradient_matches_finite_differences(rng):
    for _ in range(10):
        k, d = rng.integers(2, 6), rng.integers(1, 6)
        W = rng.standard_normal((k, d))
        X = rng.standard_normal((4, d))
        y = rng.integers(0, k, size=4)
        g = cross_entropy_grad(W, X, y)
        assert np.linalg.norm(g - _fd_grad(W, X, y)) <= 1e-5 * max(np.linalg.norm(g), 1e-12)


def test_singleton_fit():
    m = LinearModel(n_classes=2, max_iter=500).fit(np.array([[1.0]]), np.array([0]))
    assert m.predict_proba(np.array([[1.0]]))[0, 0] > 0.9


def test_zero_weights_uniform():
    m = LinearModel(n_classes=4).init_weights(3)
    assert np.allclose(m.predict_proba(np.ones((2, 3))), 0.25)


def test_regression_interpolates(rng):
    X = rng.standard_normal((5, 5))
    Wt = rng.standard_normal((3, 5))
    m = LinearModel(mode="regression").fit(X, X @ Wt.T)
    assert np.abs(m.W - Wt).max() < 1e-6


def test_softmax_examples(rng):
    assert np.allclose(softmax(np.zeros((2, 3))), 1 / 3)
    Z = rng.standard_normal((4, 5))
    assert np.allclose(softmax(Z + rng.standard_normal((4, 1)) * 50), softmax(Z), atol=1e-12)
    naive = np.exp(Z) / np.exp(Z).sum(axis=1, keepdims=True)
    assert np.abs(softmax(Z) - naive).max() < 1e-12
    assert np.all(np.isfinite(softmax(np.array([[1000.0, -1000.0]]))))


def test_metrics():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert mse(np.ones(3), np.ones(3)) == 0.0
    assert accuracy(np.zeros(4), [0, 1, 0, 1]) == 0.5
    y = np.arange(6.0).reshape(3, 2)
    assert mse(y + 1, y) == 1.0


def test_loss_non_increasing(rng):
    X = rng.standard_normal((40, 4))
    y = rng.integers(0, 3, 40)
    m = LinearModel(n_classes=3, step_size=5.0, max_iter=200).fit(X, y)
    assert all(b <= a for a, b in zip(m.losses_, m.losses_[1:]))


def test_one_hot_regression_accuracy(rng):
    y = rng.integers(0, 3, 60)
    X = one_hot(y, 3) * 3 + rng.standard_normal((60, 3)) * 0.1
    m = LinearModel(mode="regression").fit(X, one_hot(y, 3))
    assert m.predict(X).shape == (60, 3)
    assert onehot_accuracy(m, X, y) == 1.0


def test_bad_inputs():
    with pytest.raises(ConfigError):
        LinearModel(mode="svm")
    with pytest.raises(ValueError):
        LinearModel(n_classes=2).fit(np.ones((1, 2)), np.array([2]))


@given(st.integers(2, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_predict_proba_rows_sum_to_one(k, d, seed):
    rng = np.random.default_rng(seed)
    m = LinearModel(n_classes=k)
    m.W = rng.standard_normal((k, d)) * 10
    P = m.predict_proba(rng.standard_normal((7, d)))
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
