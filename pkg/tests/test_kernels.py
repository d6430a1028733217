import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bait import kernels
from bait._jit import HAVE_NUMBA
from bait.embedding import class_blocks

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _caches(rng, n, m, shrink=False):
    A = rng.standard_normal((n, m, m + 1))
    K1 = A @ A.transpose(0, 2, 1) / m
    if shrink:
        K1 = K1 / (1.0 + np.linalg.eigvalsh(K1).max(axis=1))[:, None, None]
    B = rng.standard_normal((n, m, m + 1))
    return K1, B @ B.transpose(0, 2, 1) / m


def test_project_factors_matches_dense(rng):
    X = rng.standard_normal((7, 3))
    C = class_blocks(rng.dirichlet(np.ones(4), size=7))
    G = rng.standard_normal((12, 12))
    G = G + G.T
    got = kernels.project_factors(X, C, G)
    for i in range(7):
        V = kernels.expand_factor(X[i], C[i])
        assert np.allclose(got[i], V.T @ G @ V, atol=1e-12)
    W = rng.standard_normal((12, 4))
    cross = kernels.cross_factors(X, C, W)
    for i in range(7):
        assert np.allclose(cross[i], kernels.expand_factor(X[i], C[i]).T @ W, atol=1e-12)


def test_scalar_and_block_gains_agree(rng):
    K1, K2 = _caches(rng, 20, 1)
    expected = K2[:, 0, 0] / (1 + K1[:, 0, 0])
    assert np.allclose(kernels.gains_add_np(K1, K2), expected, rtol=1e-13)
    assert np.allclose(kernels.gains_add(K1, K2), expected, rtol=1e-13)


@needs_numba
@pytest.mark.parametrize("m", [1, 2, 5])
def test_backends_agree(rng, m):
    K1, K2 = _caches(rng, 50, m)
    assert np.allclose(kernels.gains_add_np(K1, K2), kernels.gains_add_nb(K1, K2), rtol=1e-12, atol=1e-14)
    assert np.allclose(kernels.logdet_add_np(K1), kernels.logdet_add_nb(K1), rtol=1e-12, atol=1e-14)
    K1s, _ = _caches(rng, 50, m, shrink=True)
    assert np.allclose(kernels.removal_costs_np(K1s, K2), kernels.removal_costs_nb(K1s, K2), rtol=1e-10)
    a = rng.standard_normal((50, m, 3)) * 0.1
    b = rng.standard_normal((50, m, 3)) * 0.1
    Q = np.diag([0.5, 0.2, 0.1])
    E = np.eye(3)
    x1, x2 = K1.copy(), K2.copy()
    y1, y2 = K1.copy(), K2.copy()
    kernels.update_caches_np(x1, x2, a, b, Q, E)
    kernels.update_caches_nb(y1, y2, a, b, Q, E)
    assert np.allclose(x1, y1, atol=1e-14) and np.allclose(x2, y2, atol=1e-14)


@pytest.mark.parametrize("impl", ["np", "nb"])
def test_removal_jitter_and_failure(impl):
    if impl == "nb" and not HAVE_NUMBA:
        pytest.skip("numba not installed")
    fn = getattr(kernels, f"removal_costs_{impl}")
    K2 = np.eye(2)[None]
    # I - K1 exactly singular: jitter 1e-8 I rescues it
    singular = fn(np.array([[[1.0, 0.0], [0.0, 0.5]]]), K2)[0]
    assert singular == pytest.approx(1e8 + 2, rel=1e-6)
    # I - K1 indefinite: no removal possible
    assert fn(np.array([[[1.5, 0.0], [0.0, 0.5]]]), K2)[0] == np.inf
    assert fn(np.full((1, 1, 1), 2.0), np.ones((1, 1, 1)))[0] == np.inf


def test_update_caches_k1_only(rng):
    K1, _ = _caches(rng, 5, 2)
    ref = K1.copy()
    a = rng.standard_normal((5, 2, 2))
    Q = np.eye(2) * 0.3
    kernels.update_caches(K1, None, a, None, Q, None)
    assert np.allclose(K1, ref - a @ Q @ a.transpose(0, 2, 1), atol=1e-14)


@given(st.integers(1, 4), st.integers(1, 30), st.integers(0, 2**31))
def test_logdet_nonnegative(m, n, seed):
    rng = np.random.default_rng(seed)
    K1, _ = _caches(rng, n, m)
    assert np.all(kernels.logdet_add(K1) >= -1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, BAIT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from bait import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["BAIT_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", "from bait import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("numba" if HAVE_NUMBA else "numpy")
