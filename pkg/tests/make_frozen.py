"""Regenerate tests/frozen/oracles.json from the naive oracles.

Inputs are stored next to outputs so the frozen cases do not depend on any
random stream staying stable. Run from the repo root:

    python3 tests/make_frozen.py
"""
import json
from pathlib import Path

import numpy as np

import oracles

OUT = Path(__file__).parent / "frozen" / "oracles.json"


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def main():
    rng = np.random.default_rng(20240611)
    cases = {}

    x = rng.standard_normal(3)
    pi = np.array([0.2, 0.3, 0.5])
    cases["kron_fisher"] = dict(x=x.tolist(), pi=pi.tolist(), fisher=oracles.loop_fisher(x, pi).tolist())

    A = rng.standard_normal((12, 12))
    M = A @ A.T / 12 + np.eye(12)
    V = rng.standard_normal((12, 3)) * 0.7
    G = rng.standard_normal((12, 20))
    F = G @ G.T / 20
    cases["gain_dk12"] = dict(M=M.tolist(), V=V.tolist(), F=F.tolist(), gain=oracles.gain(M, V, F))

    # n=8, d=3, k=2, B=3 classification instance
    X = rng.standard_normal((8, 3))
    P = _softmax(rng.standard_normal((8, 2)) * 1.5)
    Vs = np.stack([np.kron(x[:, None], (p[:, None] - np.eye(2)) * np.sqrt(p)[None, :]) for x, p in zip(X, P)])
    for v, x, p in zip(Vs, X, P):
        assert np.allclose(v @ v.T, oracles.kron_fisher(x, p))
    F = sum(v @ v.T for v in Vs) / 8
    m0 = np.eye(6)
    best_val, best_set = oracles.brute_force_subset(Vs, m0, F, 3)
    greedy = oracles.greedy_forward(Vs, m0, F, 3)
    cases["subset_n8"] = dict(X=X.tolist(), P=P.tolist(), lam=1.0, B=3, opt=best_val, opt_set=list(best_set),
                              greedy=greedy, greedy_value=oracles.subset_objective(Vs, greedy, m0, F))

    # det-rank1: n=8, dk=6, B=3, unscaled gradient embeddings
    X = rng.standard_normal((8, 3))
    P = _softmax(rng.standard_normal((8, 2)))
    g = []
    for x, p in zip(X, P):
        e = p.copy()
        e[np.argmax(p)] -= 1.0
        g.append(np.kron(x, e)[:, None])
    chosen, scores = oracles.greedy_det(np.stack(g), np.eye(6), 3)
    cases["det_rank1_n8"] = dict(X=X.tolist(), P=P.tolist(), lam=1.0, B=3, chosen=chosen, log_scores=scores)

    S = rng.standard_normal((50, 5))
    theta = rng.standard_normal(5)
    y = S @ theta + 0.3 * rng.standard_normal(50)
    cases["ridge_m50"] = dict(X=S.tolist(), y=y.tolist(), ridge=1.0,
                              theta=oracles.ridge_by_descent(S, y, 1.0).tolist())

    allocs = []
    for _ in range(12):
        d = int(rng.integers(1, 5))
        p = rng.dirichlet(np.ones(d))
        B = int(rng.integers(0, 6))
        lam = float(rng.choice([0.5, 1.0, 2.0]))
        allocs.append(dict(p=p.tolist(), B=B, lam=lam, opt=oracles.allocation_opt(p, B, lam)))
    cases["allocations"] = allocs

    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(cases, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
