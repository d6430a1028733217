import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from bait.baselines import (
    STRATEGIES,
    greedy_logdet_select,
    select,
    select_confidence,
    select_coreset,
    select_det_full,
    select_det_rank1,
    select_random,
)
from bait.embedding import class_blocks
from bait.errors import ConfigError
from bait.selector import GreedyEngine


def test_det_lemma_by_hand():
    X = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert greedy_logdet_select(X, np.ones((2, 1, 1)), np.eye(2), 1) == [1]


def test_det_orthogonal_units_pick_distinct():
    X = np.vstack([np.eye(3), np.eye(3)])
    ids = greedy_logdet_select(X, np.ones((6, 1, 1)), np.eye(3), 2)
    assert len({i % 3 for i in ids}) == 2


def test_det_rank1_matches_direct_determinants(frozen):
    case = frozen["det_rank1_n8"]
    X, P = np.array(case["X"]), np.array(case["P"])
    history = []
    ids = select_det_rank1(X, P, [], case["B"], lam=case["lam"], history=history)
    assert ids == case["chosen"]
    got = [v for _, _, v in history]
    assert np.allclose(got, case["log_scores"], rtol=1e-8)


def test_zero_factor_scores_one(rng):
    X = np.vstack([np.zeros(3), rng.standard_normal((3, 3))])
    eng = GreedyEngine(X, np.ones((4, 1, 1)), np.eye(3))
    scores = eng.logdet_gains()
    assert scores[0] == 0.0  # log of a unit determinant ratio
    assert np.all(scores[1:] > 0)


def test_det_full_k1_equals_rank1_scaled(rng):
    # binary softmax: the full block is rank one, proportional to the gradient block
    X = rng.standard_normal((10, 3))
    P = rng.dirichlet(np.ones(2), size=10)
    C = class_blocks(P)
    V = oracles.factors(X, C)
    chosen, _ = oracles.greedy_det(V, np.eye(6), 4)
    assert select_det_full(X, P, [], 4) == chosen


def test_det_full_ignores_target(rng):
    X = rng.standard_normal((12, 3))
    P = rng.dirichlet(np.ones(3), size=12)
    G = rng.standard_normal((9, 9))
    assert select_det_full(X, P, [2], 4) == select_det_full(X, P, [2], 4, fisher_target=G @ G.T)


def test_coreset_examples():
    X = np.array([[0.0], [1.0], [10.0]])
    assert select_coreset(X, [0], 2) == [2, 1]
    assert select_coreset(np.ones((5, 2)), [], 3) == [0, 1, 2]
    assert select_coreset(X, [], 1) == [0]


def test_coreset_matches_python_kcenter(rng):
    X = rng.standard_normal((30, 4))
    assert select_coreset(X, [3, 7], 6) == oracles.kcenter(X.tolist(), [3, 7], 6)


def test_confidence_examples():
    P = np.array([[0.9, 0.1], [0.6, 0.4], [0.5, 0.5]])
    assert select_confidence(P, [], 1) == [2]
    assert select_confidence(np.full((5, 2), 0.5), [], 3) == [0, 1, 2]
    assert sorted(select_confidence(P, [0], 2)) == [1, 2]


def test_random_examples():
    a = select_random(range(10), [], 4, seed=7)
    assert a == select_random(range(10), [], 4, seed=7)
    assert sorted(select_random(range(10), [1, 2], 8, seed=1)) == [0, 3, 4, 5, 6, 7, 8, 9]


def test_random_uniform_frequencies():
    # 1e5 single draws from 10 ids; each count within 3 sigma of the binomial mean
    n, p = 100_000, 0.1
    counts = np.zeros(10, dtype=int)
    for s in range(n):
        counts[select_random(range(10), [], 1, seed=s)[0]] += 1
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma)


def test_dispatch_rejects_bad_inputs():
    X = np.eye(3)
    with pytest.raises(ConfigError):
        select("badge", X, None, [], 1)
    with pytest.raises(ConfigError):
        select("confidence", X, None, [], 1, mode="regression")
    with pytest.raises(ConfigError):
        select("det-rank1", X, None, [], 1, mode="regression")
    with pytest.raises(ConfigError):
        select("random", X, None, [0, 1], 2)


@given(st.sampled_from(STRATEGIES), st.integers(5, 12), st.integers(0, 2**31), st.integers(0, 3))
def test_every_strategy_returns_valid_batch(strategy, n, seed, n_labeled):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    P = rng.dirichlet(np.ones(3), size=n)
    labeled = rng.choice(n, size=n_labeled, replace=False).tolist()
    B = int(rng.integers(1, n - n_labeled + 1))
    a = select(strategy, X, P, labeled, B, seed=seed)
    assert a == select(strategy, X, P, labeled, B, seed=seed)
    assert len(a) == B == len(set(a))
    assert not set(a) & set(labeled)
    assert all(0 <= i < n for i in a)


def test_regression_strategies_run(rng):
    X = rng.standard_normal((20, 3))
    for s in ("bait", "bait-forward-only", "bait-no-fisher", "det-full", "coreset", "random"):
        assert len(select(s, X, None, [0, 1], 3, mode="regression")) == 3
