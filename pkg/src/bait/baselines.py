"""Reference batch-selection strategies."""
import numpy as np

from .embedding import gradient_blocks
from .errors import ConfigError, NumericalError
from .selector import (
    GreedyEngine,
    _coerce,
    pool_blocks,
    seed_matrix,
    select_batch,
    unlabeled_ids,
)

STRATEGIES = (
    "bait",
    "bait-forward-only",
    "bait-no-fisher",
    "det-rank1",
    "det-full",
    "coreset",
    "confidence",
    "random",
)
CLASSIFICATION_ONLY = ("det-rank1", "confidence")


def _check_budget(batch_size, unl):
    if batch_size < 1:
        raise ConfigError("batch size must be positive")
    if batch_size > len(unl):
        raise ConfigError(f"batch size {batch_size} exceeds the {len(unl)} unlabeled candidates")


def greedy_logdet_select(X, C, m0, batch_size, history=None):
    """Greedy argmax of log det(M + V V^T) via the determinant lemma.

    det(M + V V^T) = det(M) det(I + V^T M^-1 V); det(M) is the same for every
    candidate within a step so only the (m, m) factor is scored.
    """
    engine = GreedyEngine(X, C, m0, target=None)
    chosen = []
    for _ in range(batch_size):
        scores = engine.logdet_gains()
        scores[chosen] = -np.inf
        i = int(np.argmax(scores))
        if scores[i] == -np.inf:
            raise NumericalError("no candidate has a finite determinant score")
        if history is not None:
            history.append(("add", i, float(scores[i])))
        engine.apply(i, +1)
        chosen.append(i)
    return chosen


def _det_select(pool, C, labeled_ids, batch_size, lam, history):
    unl = unlabeled_ids(pool.n, labeled_ids)
    _check_budget(batch_size, unl)
    labeled = sorted({int(i) for i in labeled_ids})
    m0 = seed_matrix(pool.data, C, labeled, lam)
    local = [] if history is not None else None
    picks = greedy_logdet_select(pool.data[unl], C[unl], m0, batch_size, local)
    if history is not None:
        history.extend((p, int(unl[i]), v) for p, i, v in local)
    return [int(unl[i]) for i in picks]


def select_det_rank1(pool, probs, labeled_ids, batch_size, lam=1.0, history=None):
    """Greedy determinant maximization over unscaled gradient embeddings."""
    pool, probs = _coerce(pool, probs)
    if probs is None:
        raise ConfigError("det-rank1 needs class probabilities")
    pool_blocks(pool, probs, "classification")
    return _det_select(pool, gradient_blocks(probs.probs), labeled_ids, batch_size, lam, history)


def select_det_full(pool, probs, labeled_ids, batch_size, lam=1.0, fisher_target=None,
                    mode="classification", history=None):
    """Greedy determinant maximization over full pointwise Fisher matrices.

    ``fisher_target`` is accepted for interface parity and ignored: the
    determinant objective cannot see it.
    """
    pool, probs = _coerce(pool, probs)
    C = pool_blocks(pool, None if mode == "regression" else probs, mode)
    return _det_select(pool, C, labeled_ids, batch_size, lam, history)


def select_coreset(pool, labeled_ids, batch_size):
    """Greedy k-center on Euclidean embedding distances.

    Each pick maximizes the distance to its nearest labeled or already picked
    point; with nothing labeled the first pick is the lowest id.
    """
    pool, _ = _coerce(pool, None)
    X = pool.data
    unl = unlabeled_ids(pool.n, labeled_ids)
    _check_budget(batch_size, unl)
    labeled = sorted({int(i) for i in labeled_ids})
    U = X[unl]
    sq = np.einsum("ij,ij->i", U, U)
    mind = np.full(len(unl), np.inf)

    def _dist_to(points):
        d2 = sq[:, None] - 2.0 * U @ points.T + np.einsum("ij,ij->i", points, points)[None]
        return np.maximum(d2, 0.0).min(axis=1)

    step = 1024
    for s in range(0, len(labeled), step):
        mind = np.minimum(mind, _dist_to(X[labeled[s:s + step]]))
    chosen = []
    for _ in range(batch_size):
        if not chosen and not labeled:
            i = 0
        else:
            v = mind.copy()
            v[chosen] = -np.inf
            i = int(np.argmax(v))
        chosen.append(i)
        mind = np.minimum(mind, _dist_to(U[i:i + 1]))
    return [int(unl[i]) for i in chosen]


def select_confidence(probs, labeled_ids, batch_size):
    """Least-confident first: smallest max class probability, ties to lowest id."""
    P = np.asarray(getattr(probs, "probs", probs), dtype=np.float64)
    unl = unlabeled_ids(P.shape[0], labeled_ids)
    _check_budget(batch_size, unl)
    conf = P[unl].max(axis=1)
    order = np.lexsort((unl, conf))
    return [int(unl[i]) for i in order[:batch_size]]


def select_random(pool_ids, labeled_ids, batch_size, seed):
    """Uniform sample without replacement using numpy's PCG64 stream for ``seed``."""
    ids = np.asarray(pool_ids, dtype=np.int64)
    labeled = {int(i) for i in labeled_ids}
    unl = np.array(sorted(int(i) for i in ids if int(i) not in labeled), dtype=np.int64)
    _check_budget(batch_size, unl)
    rng = np.random.Generator(np.random.PCG64(seed))
    return [int(i) for i in rng.choice(unl, size=batch_size, replace=False)]


def select(strategy, pool, probs, labeled_ids, batch_size, lam=1.0, mode="classification",
           seed=0, refactor_interval=100):
    """Dispatch on a stable strategy name."""
    from .selector import SelectionConfig

    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if mode == "regression" and strategy in CLASSIFICATION_ONLY:
        raise ConfigError(f"strategy {strategy!r} needs a classification model")
    if strategy.startswith("bait"):
        cfg = SelectionConfig(
            batch_size=batch_size,
            oversample_factor=1 if strategy == "bait-forward-only" else 2,
            lam=lam,
            refactor_interval=refactor_interval,
            mode=mode,
            use_fisher=strategy != "bait-no-fisher",
        )
        return select_batch(pool, probs, labeled_ids, cfg)
    if strategy == "det-rank1":
        return select_det_rank1(pool, probs, labeled_ids, batch_size, lam)
    if strategy == "det-full":
        return select_det_full(pool, probs, labeled_ids, batch_size, lam, mode=mode)
    if strategy == "coreset":
        return select_coreset(pool, labeled_ids, batch_size)
    if strategy == "confidence":
        return select_confidence(probs, labeled_ids, batch_size)
    n = pool.n if hasattr(pool, "n") else len(pool)
    return select_random(np.arange(n), labeled_ids, batch_size, seed)
