"""Per-candidate scoring kernels.

Every candidate carries two small symmetric (m, m) caches against the current
inverse N = M^-1 and the rotated target P = N F N:

    K1_x = V_x^T N V_x        K2_x = V_x^T P V_x

From these, the gain of adding x is tr(K2 (I + K1)^-1) and the objective
increase from removing x is tr(K2 (I - K1)^-1). After a rank-m correction
N <- N - W Q W^T (W = N V_sel), the caches move by a low-rank update, so a
greedy step costs O(n d k^2) instead of O(n (dk)^2).

Each hot loop has a numba version and a numpy version with the same
semantics; the module-level names dispatch on ``bait._jit.USE_NUMBA``.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

COND_LIMIT = 1e12
JITTER = 1e-8

_CHUNK_ELEMS = 4_000_000


# --------------------------------------------------------------------------
# dense contractions (BLAS, shared by both paths)

def project_factors(X, C, G):
    """Return V_x^T G V_x for every row, shape (n, m, m).

    X is (n, d), C is (n, k, m), G is (d*k, d*k) symmetric.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    k, m = C.shape[1], C.shape[2]
    if k == 1:
        # regression / scalar-class fast path: V_x = x * c
        quad = np.einsum("na,na->n", X @ G, X)
        return quad[:, None, None] * np.einsum("nim,nil->nml", C, C)
    G2 = np.ascontiguousarray(G.reshape(d, k * d * k))
    out = np.empty((n, m, m))
    step = max(1, _CHUNK_ELEMS // (k * d * k))
    for s in range(0, n, step):
        Xs = X[s:s + step]
        T = (Xs @ G2).reshape(len(Xs), k, d, k).transpose(0, 1, 3, 2)
        H = np.matmul(T, Xs[:, None, :, None])[..., 0]
        Cs = C[s:s + step]
        out[s:s + step] = np.matmul(Cs.transpose(0, 2, 1), np.matmul(H, Cs))
    return 0.5 * (out + out.transpose(0, 2, 1))


def cross_factors(X, C, W):
    """Return V_x^T W for every row, shape (n, m, r); W is (d*k, r)."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    k = C.shape[1]
    r = W.shape[1]
    R = (X @ W.reshape(d, k * r)).reshape(n, k, r)
    return np.matmul(C.transpose(0, 2, 1), R)


def expand_factor(x, c):
    """Dense V_x = kron(x[:, None], c) for one candidate."""
    return np.kron(np.asarray(x, dtype=np.float64)[:, None], c)


# --------------------------------------------------------------------------
# numpy path

def _batched_cholesky_np(A):
    """Vectorized Cholesky over the leading axis; returns (L, ok)."""
    n, m, _ = A.shape
    L = np.zeros_like(A)
    ok = np.ones(n, dtype=bool)
    for j in range(m):
        s = A[:, j, j] - np.einsum("nk,nk->n", L[:, j, :j], L[:, j, :j])
        bad = ~(s > 0.0)
        ok &= ~bad
        piv = np.sqrt(np.where(bad, 1.0, s))
        L[:, j, j] = piv
        if j + 1 < m:
            rest = A[:, j + 1:, j] - np.einsum("nik,nk->ni", L[:, j + 1:, :j], L[:, j, :j])
            L[:, j + 1:, j] = rest / piv[:, None]
    return L, ok


def _conditioned_np(A):
    """Cholesky with the jitter rule; returns (L, ok) after at most one retry."""
    m = A.shape[1]
    L, ok = _batched_cholesky_np(A)
    diag = np.abs(np.diagonal(L, axis1=1, axis2=2))
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = (diag.max(axis=1) / diag.min(axis=1)) ** 2
    retry = ~ok | ~(cond <= COND_LIMIT)
    if np.any(retry):
        Aj = A[retry] + JITTER * np.eye(m)[None]
        Lj, okj = _batched_cholesky_np(Aj)
        L = L.copy()
        L[retry] = Lj
        ok = ok.copy()
        ok[retry] = okj
    return L, ok


def _trace_solve_np(L, K2):
    # tr((L L^T)^-1 K2) = ||L^-1 R||_F^2 is not usable (K2 may be indefinite); solve directly
    m = L.shape[1]
    A = L @ L.transpose(0, 2, 1)
    Y = np.linalg.solve(A, K2)
    return np.trace(Y, axis1=1, axis2=2) if m > 1 else Y[:, 0, 0]


def gains_add_np(K1, K2):
    n, m, _ = K1.shape
    if m == 1:
        a = 1.0 + K1[:, 0, 0]
        a = np.where(a > 1.0 / COND_LIMIT, a, a + JITTER)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = K2[:, 0, 0] / a
        return np.where(a > 0, g, -np.inf)
    A = K1 + np.eye(m)[None]
    L, ok = _conditioned_np(A)
    out = np.full(n, -np.inf)
    if np.any(ok):
        out[ok] = _trace_solve_np(L[ok], K2[ok])
    return out


def removal_costs_np(K1, K2):
    n, m, _ = K1.shape
    if m == 1:
        a = 1.0 - K1[:, 0, 0]
        a = np.where(a > 1.0 / COND_LIMIT, a, a + JITTER)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = K2[:, 0, 0] / a
        return np.where(a > 1.0 / COND_LIMIT, c, np.inf)
    A = np.eye(m)[None] - K1
    L, ok = _conditioned_np(A)
    out = np.full(n, np.inf)
    if np.any(ok):
        out[ok] = _trace_solve_np(L[ok], K2[ok])
    return out


def logdet_add_np(K1):
    n, m, _ = K1.shape
    if m == 1:
        a = 1.0 + K1[:, 0, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), -np.inf)
    L, ok = _conditioned_np(K1 + np.eye(m)[None])
    diag = np.diagonal(L, axis1=1, axis2=2)
    with np.errstate(divide="ignore"):
        out = 2.0 * np.log(diag).sum(axis=1)
    return np.where(ok, out, -np.inf)


def update_caches_np(K1, K2, a, b, Q, E):
    """In-place low-rank cache update; ``K2``/``b``/``E`` may be None."""
    aQ = a @ Q
    K1 -= aQ @ a.transpose(0, 2, 1)
    if K2 is not None:
        cross = aQ @ b.transpose(0, 2, 1)
        K2 -= cross + cross.transpose(0, 2, 1)
        K2 += aQ @ (E @ Q) @ a.transpose(0, 2, 1)


# --------------------------------------------------------------------------
# numba path

@njit
def _chol_nb(A, L):
    m = A.shape[0]
    for i in range(m):
        for j in range(m):
            L[i, j] = 0.0
    for j in range(m):
        s = A[j, j]
        for t in range(j):
            s -= L[j, t] * L[j, t]
        if not (s > 0.0):
            return False
        piv = np.sqrt(s)
        L[j, j] = piv
        for i in range(j + 1, m):
            r = A[i, j]
            for t in range(j):
                r -= L[i, t] * L[j, t]
            L[i, j] = r / piv
    return True


@njit
def _chol_conditioned_nb(A, L, cond_limit, jitter):
    m = A.shape[0]
    ok = _chol_nb(A, L)
    if ok:
        lo = np.inf
        hi = 0.0
        for j in range(m):
            v = abs(L[j, j])
            lo = min(lo, v)
            hi = max(hi, v)
        if (hi / lo) ** 2 <= cond_limit:
            return True
    for j in range(m):
        A[j, j] += jitter
    ok = _chol_nb(A, L)
    for j in range(m):
        A[j, j] -= jitter
    return ok


@njit
def _trace_chol_solve_nb(L, K, y):
    # tr(A^-1 K) with A = L L^T, one column of K at a time
    m = L.shape[0]
    tr = 0.0
    for c in range(m):
        for i in range(m):
            s = K[i, c]
            for t in range(i):
                s -= L[i, t] * y[t]
            y[i] = s / L[i, i]
        for i in range(m - 1, -1, -1):
            s = y[i]
            for t in range(i + 1, m):
                s -= L[t, i] * y[t]
            y[i] = s / L[i, i]
        tr += y[c]
    return tr


@njit
def _scalar_ratio_nb(num, den, cond_limit, jitter, fail):
    if not (den > 1.0 / cond_limit):
        den = den + jitter
        if not (den > 1.0 / cond_limit) and fail > 0:
            return np.inf
        if not (den > 0.0):
            return -np.inf
    return num / den


@njit
def _gains_add_nb(K1, K2, cond_limit, jitter):
    n, m, _ = K1.shape
    out = np.empty(n)
    A = np.empty((m, m))
    L = np.empty((m, m))
    y = np.empty(m)
    for x in range(n):
        if m == 1:
            out[x] = _scalar_ratio_nb(K2[x, 0, 0], 1.0 + K1[x, 0, 0], cond_limit, jitter, 0)
            continue
        for i in range(m):
            for j in range(m):
                A[i, j] = K1[x, i, j]
            A[i, i] += 1.0
        if _chol_conditioned_nb(A, L, cond_limit, jitter):
            out[x] = _trace_chol_solve_nb(L, K2[x], y)
        else:
            out[x] = -np.inf
    return out


@njit
def _removal_costs_nb(K1, K2, cond_limit, jitter):
    n, m, _ = K1.shape
    out = np.empty(n)
    A = np.empty((m, m))
    L = np.empty((m, m))
    y = np.empty(m)
    for x in range(n):
        if m == 1:
            out[x] = _scalar_ratio_nb(K2[x, 0, 0], 1.0 - K1[x, 0, 0], cond_limit, jitter, 1)
            continue
        for i in range(m):
            for j in range(m):
                A[i, j] = -K1[x, i, j]
            A[i, i] += 1.0
        if _chol_conditioned_nb(A, L, cond_limit, jitter):
            out[x] = _trace_chol_solve_nb(L, K2[x], y)
        else:
            out[x] = np.inf
    return out


@njit
def _logdet_add_nb(K1, cond_limit, jitter):
    n, m, _ = K1.shape
    out = np.empty(n)
    A = np.empty((m, m))
    L = np.empty((m, m))
    for x in range(n):
        if m == 1:
            a = 1.0 + K1[x, 0, 0]
            out[x] = np.log(a) if a > 0.0 else -np.inf
            continue
        for i in range(m):
            for j in range(m):
                A[i, j] = K1[x, i, j]
            A[i, i] += 1.0
        if _chol_conditioned_nb(A, L, cond_limit, jitter):
            s = 0.0
            for j in range(m):
                s += np.log(L[j, j])
            out[x] = 2.0 * s
        else:
            out[x] = -np.inf
    return out


@njit
def _update_caches_nb(K1, K2, a, b, Q, E, with_k2):
    n, m, r = a.shape
    aQ = np.empty((m, r))
    QEQ = Q @ E @ Q if with_k2 else np.zeros((r, r))
    aQEQ = np.empty((m, r))
    for x in range(n):
        for i in range(m):
            for j in range(r):
                s = 0.0
                s2 = 0.0
                for t in range(r):
                    s += a[x, i, t] * Q[t, j]
                    s2 += a[x, i, t] * QEQ[t, j]
                aQ[i, j] = s
                aQEQ[i, j] = s2
        for i in range(m):
            for j in range(m):
                s1 = 0.0
                for t in range(r):
                    s1 += aQ[i, t] * a[x, j, t]
                K1[x, i, j] -= s1
        if with_k2:
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for t in range(r):
                        s += aQ[i, t] * b[x, j, t] + aQ[j, t] * b[x, i, t] - aQEQ[i, t] * a[x, j, t]
                    K2[x, i, j] -= s


def gains_add_nb(K1, K2):
    return _gains_add_nb(np.ascontiguousarray(K1), np.ascontiguousarray(K2), COND_LIMIT, JITTER)


def removal_costs_nb(K1, K2):
    return _removal_costs_nb(np.ascontiguousarray(K1), np.ascontiguousarray(K2), COND_LIMIT, JITTER)


def logdet_add_nb(K1):
    return _logdet_add_nb(np.ascontiguousarray(K1), COND_LIMIT, JITTER)


def update_caches_nb(K1, K2, a, b, Q, E):
    a = np.ascontiguousarray(a)
    Q = np.ascontiguousarray(Q)
    if K2 is None:
        r = a.shape[2]
        _update_caches_nb(K1, K1, a, a, Q, np.zeros((r, r)), False)
    else:
        _update_caches_nb(K1, K2, a, np.ascontiguousarray(b), Q, np.ascontiguousarray(E), True)


if USE_NUMBA:
    gains_add = gains_add_nb
    removal_costs = removal_costs_nb
    logdet_add = logdet_add_nb
    update_caches = update_caches_nb
else:
    gains_add = gains_add_np
    removal_costs = removal_costs_np
    logdet_add = logdet_add_np
    update_caches = update_caches_np

BACKEND = "numba" if USE_NUMBA else "numpy"
