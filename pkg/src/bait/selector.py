"""Forward-backward greedy batch selection on the Fisher trace objective.

The objective for a labeled set S is tr(M_S^-1 F), where M_S is the
regularized sum of pointwise Fisher matrices and F is the pool-level Fisher
target. Candidates are scored with the Woodbury identity and a trace rotation
so only (k, k) systems are ever solved per candidate.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .embedding import (
    ClassProbabilities,
    EmbeddingPool,
    FisherFactor,
    InfoMatrix,
    check_fisher_dim,
    class_blocks,
    global_fisher,
    structured_fisher_sum,
)
from .errors import ConfigError, DimensionError, NumericalError

MODES = ("classification", "regression")


@dataclass
class SelectionConfig:
    batch_size: int
    oversample_factor: int = 2
    lam: float = 1.0
    refactor_interval: int = 100
    mode: str = "classification"
    use_fisher: bool = True

    def __post_init__(self):
        if int(self.batch_size) < 1:
            raise ConfigError("batch_size must be a positive integer")
        if int(self.oversample_factor) < 1:
            raise ConfigError("oversample_factor must be a positive integer")
        if not self.lam >= 0:
            raise ConfigError("lambda must be non-negative")
        if int(self.refactor_interval) < 1:
            raise ConfigError("refactor_interval must be a positive integer")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class InfoState:
    """Maintained information matrix and its inverse.

    ``mat`` is kept alongside ``m_inv`` so the inverse can be refactored from
    scratch every ``refactor_interval`` updates.
    """

    mat: np.ndarray
    m_inv: np.ndarray
    fisher_target: np.ndarray
    lam: float = 1.0
    selected: list = field(default_factory=list)
    update_count: int = 0
    refactor_interval: int = 100

    @property
    def dim(self):
        return self.mat.shape[0]

    def objective(self):
        return float(np.sum(self.m_inv * self.fisher_target.T))

    def refactor(self):
        self.m_inv = spd_inverse(self.mat)

    def audit(self):
        """Relative Frobenius error of the maintained inverse against direct inversion."""
        direct = spd_inverse(self.mat)
        return float(np.linalg.norm(self.m_inv - direct) / np.linalg.norm(direct))


def spd_inverse(mat):
    try:
        L = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("information matrix is not positive definite") from exc
    Linv = np.linalg.solve(L, np.eye(mat.shape[0]))
    return Linv.T @ Linv


def init_state(fisher_target, lam=1.0, seed_fisher=None, refactor_interval=100):
    """Build M_0 = lam I (+ seed_fisher) and its inverse."""
    F = fisher_target.mat if isinstance(fisher_target, InfoMatrix) else np.asarray(fisher_target, dtype=np.float64)
    dim = F.shape[0]
    mat = lam * np.eye(dim)
    if seed_fisher is not None:
        mat = mat + seed_fisher
    return InfoState(mat=mat, m_inv=spd_inverse(mat), fisher_target=F, lam=lam,
                     refactor_interval=refactor_interval)


def _as_factor(factor):
    V = factor.factor if isinstance(factor, FisherFactor) else np.asarray(factor, dtype=np.float64)
    return V[:, None] if V.ndim == 1 else V


def score_candidate(state, factor):
    """Gain tr(V^T N F N V A^-1), A = I + V^T N V, of adding one candidate.

    Equals tr(N F) - tr((M + V V^T)^-1 F). A candidate whose A stays singular
    after jitter scores -inf.
    """
    V = _as_factor(factor)
    if V.shape[0] != state.dim:
        raise DimensionError(f"factor has {V.shape[0]} rows, state dimension is {state.dim}")
    W = state.m_inv @ V
    K1 = V.T @ W
    K2 = W.T @ state.fisher_target @ W
    return float(kernels.gains_add_np(K1[None], 0.5 * (K2 + K2.T)[None])[0])


def score_candidate_regression(state, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.dim,):
        raise DimensionError(f"x has shape {x.shape}, state dimension is {state.dim}")
    w = state.m_inv @ x
    num = w @ state.fisher_target @ w
    return float(kernels.gains_add_np(np.array([[[x @ w]]]), np.array([[[num]]]))[0])


def _woodbury(state, V, sign):
    """Rank-m update of ``state``; returns (W, Q) with N' = N - W Q W^T."""
    m = V.shape[1]
    W = state.m_inv @ V
    S = V.T @ W
    S = 0.5 * (S + S.T)
    if sign > 0:
        Q = spd_inverse(np.eye(m) + S)
    else:
        try:
            Q = -spd_inverse(np.eye(m) - S)
        except NumericalError as exc:
            raise NumericalError("removal leaves the information matrix non positive definite") from exc
    state.m_inv = state.m_inv - W @ Q @ W.T
    state.m_inv = 0.5 * (state.m_inv + state.m_inv.T)
    state.mat = state.mat + sign * (V @ V.T)
    state.update_count += 1
    return W, Q


def apply_update(state, factor, direction="add", owner=None):
    """Add or remove one candidate's Fisher from ``state`` (in place; returns it).

    Every ``refactor_interval`` updates the inverse is recomputed directly.
    """
    if direction not in ("add", "remove"):
        raise ValueError(f"direction must be 'add' or 'remove', got {direction!r}")
    V = _as_factor(factor)
    if owner is None and isinstance(factor, FisherFactor):
        owner = factor.owner
    if direction == "add":
        if owner is not None and owner in state.selected:
            raise ValueError(f"candidate {owner} is already selected")
        _woodbury(state, V, +1)
        if owner is not None:
            state.selected.append(owner)
    else:
        if owner is not None and owner not in state.selected:
            raise ValueError(f"candidate {owner} is not selected")
        _woodbury(state, V, -1)
        if owner is not None:
            state.selected.remove(owner)
    if state.update_count % state.refactor_interval == 0:
        state.refactor()
    return state


class GreedyEngine:
    """Per-candidate caches over a fixed candidate set.

    X (n, d) and C (n, k, m) describe the factors V_x = kron(x, C_x). With a
    ``target`` the engine tracks both trace caches; without one it tracks only
    K1 (enough for determinant scores).

    Between refactorizations the inverse is held implicitly as
    N = N0 - sum_t W_t Q_t W_t^T, so a step never touches a dense (dk, dk)
    matrix beyond two matrix-vector products.
    """

    def __init__(self, X, C, m0, target=None, refactor_interval=100):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.C = np.ascontiguousarray(C, dtype=np.float64)
        self.track_target = target is not None
        self.F = np.asarray(target, dtype=np.float64) if self.track_target else None
        self.mat = np.array(m0, dtype=np.float64)
        self.refactor_interval = refactor_interval
        self.update_count = 0
        self.refactor()

    def refactor(self):
        if getattr(self, "_pending", None):
            for V, sign in self._pending:
                self.mat += sign * (V @ V.T)
        self._pending = []
        self._corr = []
        self.N0 = spd_inverse(self.mat)
        self.K1 = kernels.project_factors(self.X, self.C, self.N0)
        if self.track_target:
            P = self.N0 @ self.F @ self.N0
            self.P0 = 0.5 * (P + P.T)
            self.K2 = kernels.project_factors(self.X, self.C, self.P0)
            self._base_objective = float(np.sum(self.N0 * self.F))
        else:
            self.P0 = self.K2 = None

    def factor(self, i):
        return kernels.expand_factor(self.X[i], self.C[i])

    def inverse(self):
        """Dense current inverse (for audits)."""
        N = self.N0.copy()
        for W, Q, _, _ in self._corr:
            N -= W @ Q @ W.T
        return N

    def objective(self):
        """tr(M^-1 F) for the current state."""
        return self._base_objective - sum(float(np.sum(Q * E)) for _, Q, _, E in self._corr)

    def add_gains(self):
        return kernels.gains_add(self.K1, self.K2)

    def removal_costs(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return kernels.removal_costs(self.K1[idx], self.K2[idx])

    def logdet_gains(self):
        return kernels.logdet_add(self.K1)

    def _apply_inverse(self, V):
        W = self.N0 @ V
        for Wt, Qt, _, _ in self._corr:
            W -= Wt @ (Qt @ (Wt.T @ V))
        return W

    def _apply_rotated(self, V):
        Z = self.P0 @ V
        for Wt, Qt, Zt, Et in self._corr:
            wv = Qt @ (Wt.T @ V)
            Z -= Wt @ (Qt @ (Zt.T @ V)) + Zt @ wv - Wt @ (Qt @ (Et @ wv))
        return Z

    def apply(self, i, sign):
        V = self.factor(i)
        m = V.shape[1]
        W = self._apply_inverse(V)
        S = V.T @ W
        S = 0.5 * (S + S.T)
        if sign > 0:
            Q = spd_inverse(np.eye(m) + S)
        else:
            try:
                Q = -spd_inverse(np.eye(m) - S)
            except NumericalError as exc:
                raise NumericalError("removal leaves the information matrix non positive definite") from exc
        self._pending.append((V, sign))
        self.update_count += 1
        if self.update_count % self.refactor_interval == 0:
            self.refactor()
            return
        a = kernels.cross_factors(self.X, self.C, W)
        if self.track_target:
            Z = self._apply_rotated(V)
            E = V.T @ Z
            E = 0.5 * (E + E.T)
            b = kernels.cross_factors(self.X, self.C, Z)
            kernels.update_caches(self.K1, self.K2, a, b, Q, E)
        else:
            Z = E = None
            kernels.update_caches(self.K1, None, a, None, Q, None)
        self._corr.append((W, Q, Z, E))


def _argmax_first(values, exclude):
    v = np.array(values, dtype=np.float64, copy=True)
    if exclude:
        v[list(exclude)] = -np.inf
    i = int(np.argmax(v))
    return i, v[i]


def greedy_trace_select(X, C, m0, target, batch_size, oversample_factor=2,
                        refactor_interval=100, history=None):
    """Forward-backward greedy minimization of tr(M^-1 F) over rows of X.

    Returns local row indices in forward-selection order (removed rows
    dropped). Ties go to the lowest row index. ``history``, if a list, receives
    (phase, row, value) tuples.
    """
    n = X.shape[0]
    if batch_size > n:
        raise ConfigError(f"batch size {batch_size} exceeds the {n} available candidates")
    n_forward = min(oversample_factor * batch_size, n)
    engine = GreedyEngine(X, C, m0, target, refactor_interval)
    chosen = []
    for _ in range(n_forward):
        i, g = _argmax_first(engine.add_gains(), chosen)
        if g == -np.inf:
            raise NumericalError("no candidate has a finite gain")
        engine.apply(i, +1)
        chosen.append(i)
        if history is not None:
            history.append(("add", i, float(g)))
    while len(chosen) > batch_size:
        order = sorted(chosen)
        costs = engine.removal_costs(order)
        j = int(np.argmin(costs))
        if costs[j] == np.inf:
            raise NumericalError("no selected candidate can be removed")
        engine.apply(order[j], -1)
        chosen.remove(order[j])
        if history is not None:
            history.append(("remove", order[j], float(costs[j])))
    return chosen


def pool_blocks(pool, probs, mode):
    """Structured factor blocks C for every pool row."""
    if mode == "regression":
        return np.ones((pool.n, 1, 1))
    if probs is None:
        raise ConfigError("classification mode needs class probabilities")
    if probs.n != pool.n:
        raise DimensionError(f"pool has {pool.n} rows but probabilities have {probs.n}")
    check_fisher_dim(pool.d, probs.k)
    return class_blocks(probs.probs)


def seed_matrix(X, C, labeled, lam):
    """lam I plus the average structured Fisher over ``labeled`` rows (zero if empty)."""
    dim = X.shape[1] * C.shape[1]
    m0 = lam * np.eye(dim)
    if len(labeled):
        idx = np.asarray(labeled, dtype=np.intp)
        m0 += structured_fisher_sum(X[idx], C[idx]) / len(idx)
    return m0


def unlabeled_ids(n, labeled_ids):
    labeled = {int(i) for i in labeled_ids}
    bad = [i for i in labeled if not 0 <= i < n]
    if bad:
        raise ConfigError(f"labeled ids out of range: {sorted(bad)[:5]}")
    return np.array([i for i in range(n) if i not in labeled], dtype=np.intp)


def _coerce(pool, probs):
    if not isinstance(pool, EmbeddingPool):
        pool = EmbeddingPool(pool)
    if probs is not None and not isinstance(probs, ClassProbabilities):
        probs = ClassProbabilities(probs)
    return pool, probs


def select_batch(pool, probs, labeled_ids, cfg, fisher_target=None, history=None):
    """Select ``cfg.batch_size`` unlabeled pool ids with forward-backward greedy.

    The Fisher target defaults to the average Fisher over every pool row; with
    ``cfg.use_fisher`` False the identity is used instead.
    """
    pool, probs = _coerce(pool, probs)
    if cfg.mode == "regression":
        probs = None
    C = pool_blocks(pool, probs, cfg.mode)
    unl = unlabeled_ids(pool.n, labeled_ids)
    if cfg.batch_size > len(unl):
        raise ConfigError(f"batch size {cfg.batch_size} exceeds the {len(unl)} unlabeled candidates")
    dim = pool.d * C.shape[1]
    if not cfg.use_fisher:
        F = np.eye(dim)
    elif fisher_target is None:
        F = global_fisher(pool, probs).mat
    else:
        F = fisher_target.mat if isinstance(fisher_target, InfoMatrix) else np.asarray(fisher_target, dtype=np.float64)
        if F.shape != (dim, dim):
            raise DimensionError(f"fisher target has shape {F.shape}, expected {(dim, dim)}")
    labeled = sorted({int(i) for i in labeled_ids})
    m0 = seed_matrix(pool.data, C, labeled, cfg.lam)
    local_history = [] if history is not None else None
    picks = greedy_trace_select(pool.data[unl], C[unl], m0, F, cfg.batch_size,
                                cfg.oversample_factor, cfg.refactor_interval, local_history)
    if history is not None:
        history.extend((phase, int(unl[i]), v) for phase, i, v in local_history)
    return [int(unl[i]) for i in picks]
