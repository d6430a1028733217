"""Checkpoint budgets, paired t-scores and the pairwise penalty matrix."""
import csv
import math
from collections import defaultdict

import numpy as np

from .errors import ConfigError

T_THRESHOLD = 2.776


def t_score(e_i, e_j):
    """Paired t statistic sqrt(N) * mean(diff) / std(diff, ddof=1).

    Zero spread gives sign(mean) * inf, or 0 when the mean is zero too.
    """
    diff = np.asarray(e_i, dtype=np.float64) - np.asarray(e_j, dtype=np.float64)
    if diff.ndim != 1 or len(diff) < 2:
        raise ValueError("t_score needs two equal-length lists with at least two entries")
    n = len(diff)
    mu = diff.mean()
    sigma = math.sqrt(((diff - mu) ** 2).sum() / (n - 1))
    if sigma == 0.0:
        return 0.0 if mu == 0.0 else math.copysign(math.inf, mu)
    return math.sqrt(n) * mu / sigma


def mean_curve(records):
    """Mean metric per round across runs, keyed by labeled count."""
    by_labeled = defaultdict(list)
    for rec in records:
        for r in rec.rounds:
            by_labeled[r.labeled].append(r.metric)
    budgets = sorted(by_labeled)
    return budgets, [float(np.mean(by_labeled[b])) for b in budgets]


def checkpoint_budgets(random_records, batch_size, seed_size, tol=0.01, higher_is_better=True):
    """Budgets seed_size + 2^k * batch_size that do not exceed the convergence budget r.

    r is the first labeled count at which the mean random-selection metric is
    within ``tol`` (absolute) of its final value.
    """
    budgets, curve = mean_curve(random_records)
    if not budgets:
        raise ConfigError("no random-selection rounds to checkpoint against")
    final = curve[-1]
    r = budgets[-1]
    for b, v in zip(budgets, curve):
        close = v >= final - tol if higher_is_better else v <= final + tol
        if close:
            r = b
            break
    out = []
    k = 0
    while seed_size + (2 ** k) * batch_size <= r:
        out.append(seed_size + (2 ** k) * batch_size)
        k += 1
    return out


def metric_at_budget(record, budget):
    """Metric of the last recorded round with labeled count <= budget."""
    best = None
    for r in record.rounds:
        if r.labeled <= budget and (best is None or r.labeled > best.labeled):
            best = r
    if best is None:
        raise ConfigError(f"run {record.strategy}/{record.seed} has no round at or below budget {budget}")
    return best.metric


def pairwise_penalty(records, budgets, strategies=None, threshold=T_THRESHOLD, higher_is_better=True):
    """Penalty matrix P where P[i, j] += 1/z whenever i significantly beats j at a budget.

    Runs are paired by seed. Returns (strategy names, P, column means over the
    off-diagonal entries).
    """
    by_strategy = defaultdict(dict)
    for rec in records:
        by_strategy[rec.strategy][rec.seed] = rec
    names = list(strategies) if strategies is not None else sorted(by_strategy)
    s = len(names)
    P = np.zeros((s, s))
    z = len(budgets)
    if z == 0:
        return names, P, np.zeros(s)
    sign = 1.0 if higher_is_better else -1.0
    for L in budgets:
        for i in range(s):
            for j in range(i + 1, s):
                runs_i, runs_j = by_strategy[names[i]], by_strategy[names[j]]
                seeds = sorted(set(runs_i) & set(runs_j))
                if len(seeds) < 2:
                    continue
                e_i = [sign * metric_at_budget(runs_i[sd], L) for sd in seeds]
                e_j = [sign * metric_at_budget(runs_j[sd], L) for sd in seeds]
                t = t_score(e_i, e_j)
                if t > threshold:
                    P[i, j] += 1.0 / z
                elif t < -threshold:
                    P[j, i] += 1.0 / z
    return names, P, column_means(P)


def column_means(P):
    s = P.shape[0]
    if s < 2:
        return np.zeros(s)
    return P.sum(axis=0) / (s - 1)


def write_penalty(path, names, P, means):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy"] + list(names))
        for name, row in zip(names, P):
            w.writerow([name] + [repr(float(v)) for v in row])
        w.writerow(["mean"] + [repr(float(v)) for v in means])
