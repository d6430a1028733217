"""Embeddings, class probabilities and Fisher information constructions.

Layout convention: a Fisher factor for a feature vector ``x`` (length d) and a
k-class probability vector ``pi`` is the (d*k, k) matrix whose column i is
``sqrt(pi_i) * kron(x, pi - e_i)``. The class index varies fastest inside each
feature block, matching ``np.kron(x, v)``.

Internally, factors for a whole pool are kept in structured form: the pool
matrix X (n, d) and a stack of small "class blocks" C (n, k, m) so that
``V_x = kron(x[:, None], C_x)``. Classification uses m = k, the rank-one
gradient embedding uses m = 1, and regression uses k = m = 1 with C = 1.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

PROB_CLIP = 1e-12
MAX_FISHER_DIM = 4096


@dataclass(frozen=True)
class EmbeddingPool:
    """Candidate feature vectors, one row per candidate.

    Row order is the canonical candidate order; ids are 0..n-1.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"pool must be a non-empty 2-d matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("pool contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    @property
    def ids(self):
        return np.arange(self.n)

    def __len__(self):
        return self.n


def clip_probs(probs):
    """Clip to [PROB_CLIP, 1] and renormalize each row."""
    p = np.asarray(probs, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities contain non-finite entries")
    p = np.clip(p, PROB_CLIP, 1.0)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class ClassProbabilities:
    probs: np.ndarray
    clipped: bool = field(default=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] < 1:
            raise DimensionError(f"probabilities must be (n, k), got shape {p.shape}")
        p = np.ascontiguousarray(clip_probs(p))
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "clipped", True)

    @property
    def n(self):
        return self.probs.shape[0]

    @property
    def k(self):
        return self.probs.shape[1]


@dataclass(frozen=True)
class FisherFactor:
    """A (d*k, k) matrix V with V V^T equal to the pointwise Fisher of ``owner``."""

    factor: np.ndarray
    owner: int = -1

    @property
    def rank(self):
        return self.factor.shape[1]

    def fisher(self):
        return self.factor @ self.factor.T


@dataclass(frozen=True)
class InfoMatrix:
    mat: np.ndarray
    layout: str  # "classification" (dk x dk) or "regression" (d x d)

    def __post_init__(self):
        if self.layout not in ("classification", "regression"):
            raise ValueError(f"unknown layout {self.layout!r}")


def _check_vector(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError(f"{name} must be a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def class_blocks(probs):
    """Stack of (k, k) blocks C with C[:, i] = sqrt(pi_i) * (pi - e_i).

    ``C @ C.T == diag(pi) - pi pi^T`` for every row.
    """
    p = np.asarray(probs, dtype=np.float64)
    squeeze = p.ndim == 1
    p = np.atleast_2d(p)
    k = p.shape[1]
    blocks = (p[:, :, None] - np.eye(k)[None]) * np.sqrt(p)[:, None, :]
    return blocks[0] if squeeze else blocks


def gradient_blocks(probs):
    """Stack of (k, 1) blocks ``pi - e_yhat`` for the most likely label yhat."""
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    yhat = np.argmax(p, axis=1)
    g = p.copy()
    g[np.arange(p.shape[0]), yhat] -= 1.0
    return g[:, :, None]


def check_fisher_dim(d, k):
    if d * k > MAX_FISHER_DIM:
        raise DimensionError(
            f"Fisher dimension d*k = {d * k} exceeds the cap of {MAX_FISHER_DIM}; "
            "the dense (dk x dk) target needs O((dk)^2) memory"
        )


def fisher_factor_classification(x, pi, owner=-1):
    x = _check_vector(x, "x")
    pi = _check_vector(pi, "pi")
    if pi.size < 1:
        raise DimensionError("need at least one class")
    pi = clip_probs(pi)
    return FisherFactor(np.kron(x[:, None], class_blocks(pi)), owner)


def gradient_embedding(x, pi):
    """Unscaled last-layer gradient ``kron(x, pi - e_yhat)`` for the most likely label."""
    x = _check_vector(x, "x")
    pi = clip_probs(_check_vector(pi, "pi"))
    return np.kron(x, gradient_blocks(pi)[0, :, 0])


def fisher_pointwise_regression(x):
    x = _check_vector(x, "x")
    return InfoMatrix(np.outer(x, x), "regression")


def structured_fisher_sum(X, C, weights=None):
    """Sum over rows of kron(x x^T, C C^T), returned as a dense (d*k, d*k) matrix.

    ``weights`` scales each row's term; the block C has shape (n, k, m).
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    n, d = X.shape
    k = C.shape[1]
    D = np.einsum("nim,njm->nij", C, C)
    if weights is not None:
        D = D * np.asarray(weights, dtype=np.float64)[:, None, None]
    # out[a, i, b, j] = sum_n x_a x_b D_n[i, j]
    out = np.zeros((d, k, d, k))
    step = max(1, 2_000_000 // max(1, d * k * k))
    for s in range(0, n, step):
        Xs, Ds = X[s:s + step], D[s:s + step]
        tmp = (Xs[:, :, None, None] * Ds[:, None, :, :]).reshape(len(Xs), d * k * k)
        out += (Xs.T @ tmp).reshape(d, d, k, k).transpose(0, 2, 1, 3)
    out = out.reshape(d * k, d * k)
    return 0.5 * (out + out.T)


def global_fisher(pool, probs=None, rows=None):
    """Average pointwise Fisher over the pool (or over ``rows`` of it).

    With ``probs`` the classification layout is used, otherwise the reduced
    regression form (1/n) sum x x^T.
    """
    X = pool.data if isinstance(pool, EmbeddingPool) else np.asarray(pool, dtype=np.float64)
    if rows is not None:
        X = X[np.asarray(rows, dtype=np.intp)]
    if X.shape[0] == 0:
        raise ValueError("cannot average Fisher over an empty set")
    if probs is None:
        return InfoMatrix((X.T @ X) / X.shape[0], "regression")
    P = probs.probs if isinstance(probs, ClassProbabilities) else clip_probs(probs)
    if rows is not None:
        P = P[np.asarray(rows, dtype=np.intp)]
    if P.shape[0] != X.shape[0]:
        raise DimensionError(f"pool has {X.shape[0]} rows but probabilities have {P.shape[0]}")
    check_fisher_dim(X.shape[1], P.shape[1])
    return InfoMatrix(structured_fisher_sum(X, class_blocks(P)) / X.shape[0], "classification")
