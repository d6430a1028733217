"""Bayesian linear regression: MAP, exact Bayes risk and the orthonormal-support allocation problem."""
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .embedding import EmbeddingPool
from .errors import ConfigError
from .selector import greedy_trace_select
from .baselines import greedy_logdet_select

MAX_ALLOCATIONS = 10**7
SYNTH_KINDS = ("gaussian-decay", "orthonormal-decay")


@dataclass(frozen=True)
class BayesSetup:
    """Prior theta* ~ N(0, I/lam), noise variance sigma2, second moment Sigma of the unlabeled data."""

    sigma2: float
    lam: float
    Sigma: np.ndarray

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.lam > 0):
            raise ValueError("sigma2 and lam must be strictly positive")
        S = np.asarray(self.Sigma, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("Sigma must be square")
        if np.abs(S - S.T).max() > 1e-12:
            raise ValueError("Sigma must be symmetric")
        if np.linalg.eigvalsh(S).min() < -1e-12:
            raise ValueError("Sigma must be positive semidefinite")
        object.__setattr__(self, "Sigma", S)

    @property
    def d(self):
        return self.Sigma.shape[0]

    @property
    def ridge(self):
        return self.lam * self.sigma2


@dataclass(frozen=True)
class Allocation:
    n: tuple
    lam: float

    def __post_init__(self):
        counts = tuple(int(c) for c in self.n)
        if any(c < 0 for c in counts):
            raise ValueError("allocation counts must be non-negative")
        object.__setattr__(self, "n", counts)

    @property
    def total(self):
        return sum(self.n)


def ridge_map(X, y, setup):
    """MAP estimate (X^T X + lam sigma2 I)^-1 X^T y."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    A = X.T @ X + setup.ridge * np.eye(X.shape[1])
    return np.linalg.solve(A, X.T @ y)


def bayes_risk(S, setup):
    """sigma2 * tr(Lambda_S^-1 Sigma) with Lambda_S = S^T S + lam sigma2 I; S may have zero rows."""
    S = np.asarray(S, dtype=np.float64).reshape(-1, setup.d)
    Lam = S.T @ S + setup.ridge * np.eye(setup.d)
    return float(setup.sigma2 * np.trace(np.linalg.solve(Lam, setup.Sigma)))


def monte_carlo_bayes_risk(S, setup, draws=100_000, seed=0, chunk=20_000):
    """Simulate E[(theta_hat - theta*)^T Sigma (theta_hat - theta*)].

    Returns (mean, half width of a 95% normal interval).
    """
    S = np.asarray(S, dtype=np.float64).reshape(-1, setup.d)
    m, d = S.shape
    rng = np.random.Generator(np.random.PCG64(seed))
    A = S.T @ S + setup.ridge * np.eye(d)
    H = np.linalg.solve(A, S.T)  # theta_hat = H y
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        theta = rng.standard_normal((b, d)) / np.sqrt(setup.lam)
        noise = rng.standard_normal((b, m)) * np.sqrt(setup.sigma2)
        y = theta @ S.T + noise
        err = y @ H.T - theta
        loss = np.einsum("bi,ij,bj->b", err, setup.Sigma, err)
        total += loss.sum()
        total_sq += (loss ** 2).sum()
        done += b
    mean = total / draws
    var = max(total_sq / draws - mean ** 2, 0.0)
    return float(mean), float(1.96 * np.sqrt(var / draws))


def val(alloc, p, exact=False):
    """sum_i p_i / (n_i + lam). With ``exact`` the sum is done in rationals."""
    n = alloc.n if isinstance(alloc, Allocation) else tuple(alloc)
    lam = alloc.lam
    if len(n) != len(p):
        raise ValueError("allocation and p have different lengths")
    if exact:
        lam_q = Fraction(lam)
        return sum(Fraction(pi) / (ni + lam_q) for pi, ni in zip(p, n))
    return float(sum(pi / (ni + lam) for pi, ni in zip(p, n)))


def greedy_alloc(p, B, lam, trajectory=None):
    """Add one count at a time to the coordinate with the most negative marginal change."""
    p = np.asarray(p, dtype=np.float64)
    counts = np.zeros(len(p), dtype=np.int64)
    for _ in range(int(B)):
        delta = p / (counts + 1 + lam) - p / (counts + lam)
        counts[int(np.argmin(delta))] += 1
        if trajectory is not None:
            trajectory.append(Allocation(tuple(counts), lam))
    return Allocation(tuple(counts), lam)


def count_allocations(d, B):
    return comb(B + d, d)


def _compositions(d, B):
    """All n in N^d with sum(n) <= B, in lexicographic order."""
    if d == 1:
        for c in range(B + 1):
            yield (c,)
        return
    for c in range(B + 1):
        for rest in _compositions(d - 1, B - c):
            yield (c,) + rest


def brute_force_opt(p, B, lam, exact=False):
    """Exact minimizer of val over sum(n) <= B; ties go to the lexicographically smallest n."""
    d = len(p)
    if count_allocations(d, B) > MAX_ALLOCATIONS:
        raise ConfigError(f"{count_allocations(d, B)} allocations exceed the enumeration guard")
    best, best_val = None, None
    for n in _compositions(d, int(B)):
        v = val(Allocation(n, lam), p, exact=exact)
        if best_val is None or v < best_val:
            best, best_val = n, v
    return Allocation(best, lam)


def decay_probabilities(d):
    w = 1.0 / np.arange(1, d + 1) ** 2
    return w / w.sum()


def synth_distribution(kind, d, n, seed):
    """Sample a pool whose population second moment is diag(p), p_i proportional to 1/i^2.

    Returns (pool, p). For "orthonormal-decay" every row is a standard basis
    vector e_i drawn with probability p_i.
    """
    if kind not in SYNTH_KINDS:
        raise ConfigError(f"kind must be one of {SYNTH_KINDS}, got {kind!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    p = decay_probabilities(d)
    if kind == "gaussian-decay":
        X = rng.standard_normal((n, d)) * np.sqrt(p)
    else:
        X = np.zeros((n, d))
        X[np.arange(n), rng.choice(d, size=n, p=p)] = 1.0
    return EmbeddingPool(X), p


def risk_curves(kind, d=100, b_max=100, lam=1.0, sigma2=1.0, n=None, seed=0):
    """Bayes risk after greedy selection of B = 1..b_max points for both objectives.

    "trace-fisher" greedily minimizes tr(Lambda_S^-1 Sigma); "log-det"
    greedily maximizes log det(Lambda_S). Both use forward greedy only, so the
    B-point selection is the prefix of one run. Sigma is the population
    second moment diag(p).
    """
    if n is None:
        n = 5_000 if kind == "gaussian-decay" else 100_000
    pool, p = synth_distribution(kind, d, n, seed)
    setup = BayesSetup(sigma2=sigma2, lam=lam, Sigma=np.diag(p))
    X = pool.data
    if kind == "orthonormal-decay":
        # duplicates of e_i are interchangeable; keep b_max copies at most, in pool order
        coord = X.argmax(axis=1)
        keep = np.zeros(n, dtype=bool)
        for i in range(d):
            keep[np.flatnonzero(coord == i)[:b_max]] = True
        X = X[keep]
    C = np.ones((X.shape[0], 1, 1))
    m0 = setup.ridge * np.eye(d)
    trace_pick = greedy_trace_select(X, C, m0, setup.Sigma, b_max, oversample_factor=1)
    det_pick = greedy_logdet_select(X, C, m0, b_max)
    rows = []
    for B in range(1, b_max + 1):
        rows.append((B, "trace-fisher", bayes_risk(X[trace_pick[:B]], setup)))
        rows.append((B, "log-det", bayes_risk(X[det_pick[:B]], setup)))
    return rows, X, trace_pick, det_pick
