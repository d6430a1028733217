"""Time the numba kernels against the pure-numpy fallback.

Kernel timings run both paths in-process. The end-to-end timing runs one
``select_batch`` call in a subprocess per backend, toggled with
BAIT_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--n 2000] [--d 128] [--k 10]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from bait import kernels
from bait._jit import HAVE_NUMBA


def best_of(fn, repeats=5):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def random_caches(n, m, rng):
    A = rng.standard_normal((n, m, m + 2))
    K1 = A @ A.transpose(0, 2, 1) / m
    B = rng.standard_normal((n, m, m + 2))
    K2 = B @ B.transpose(0, 2, 1) / m
    return K1, K2


def bench_kernels(n, m, rng):
    K1, K2 = random_caches(n, m, rng)
    # removal needs I - K1 positive definite
    K1r = K1 / (1.0 + np.linalg.eigvalsh(K1).max(axis=1))[:, None, None]
    a = rng.standard_normal((n, m, m)) * 0.1
    b = rng.standard_normal((n, m, m)) * 0.1
    Q = np.eye(m) * 0.5
    E = np.eye(m)
    rows = []
    pairs = [
        ("gains_add", lambda: kernels.gains_add_np(K1, K2), lambda: kernels.gains_add_nb(K1, K2)),
        ("removal_costs", lambda: kernels.removal_costs_np(K1r, K2), lambda: kernels.removal_costs_nb(K1r, K2)),
        ("logdet_add", lambda: kernels.logdet_add_np(K1), lambda: kernels.logdet_add_nb(K1)),
        ("update_caches",
         lambda: kernels.update_caches_np(K1.copy(), K2.copy(), a, b, Q, E),
         lambda: kernels.update_caches_nb(K1.copy(), K2.copy(), a, b, Q, E)),
    ]
    for name, f_np, f_nb in pairs:
        t_np = best_of(f_np)
        t_nb = best_of(f_nb) if HAVE_NUMBA else float("nan")
        if HAVE_NUMBA and name != "update_caches":
            err = float(np.nanmax(np.abs(np.nan_to_num(f_np() - f_nb(), posinf=0, neginf=0))))
        else:
            err = float("nan")
        rows.append((name, t_np, t_nb, err))
    return rows


_E2E = """
import json, time, numpy as np
from bait import kernels, select_batch, SelectionConfig
rng = np.random.default_rng(0)
n, d, k, B = {n}, {d}, {k}, {B}
X = rng.standard_normal((n, d)) / np.sqrt(d)
logits = rng.standard_normal((n, k)) * 2
P = np.exp(logits - logits.max(1, keepdims=True)); P /= P.sum(1, keepdims=True)
cfg = SelectionConfig(batch_size=B)
select_batch(X[:50], P[:50], [], SelectionConfig(batch_size=2))
t0 = time.perf_counter()
ids = select_batch(X, P, list(range(100)), cfg)
print(json.dumps(dict(backend=kernels.BACKEND, seconds=time.perf_counter() - t0, ids=ids)))
"""


def bench_end_to_end(n, d, k, B):
    out = {}
    for disable in ("0", "1"):
        env = dict(os.environ, BAIT_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", _E2E.format(n=n, d=d, k=k, B=B)],
                             env=env, capture_output=True, text=True, check=True)
        rec = json.loads(res.stdout.strip().splitlines()[-1])
        out[rec["backend"]] = rec
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--B", type=int, default=10)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"kernels: n={args.n} m={args.k} (numba available: {HAVE_NUMBA})")
    print(f"{'kernel':16s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, t_np, t_nb, err in bench_kernels(args.n, args.k, rng):
        print(f"{name:16s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f} {err:10.2e}")

    if not args.skip_e2e:
        res = bench_end_to_end(args.n, args.d, args.k, args.B)
        print(f"\nselect_batch: n={args.n} d={args.d} k={args.k} B={args.B}")
        for backend, rec in res.items():
            print(f"{backend:8s} {rec['seconds']:8.2f} s")
        if len(res) == 2:
            same = res["numba"]["ids"] == res["numpy"]["ids"]
            print(f"identical selections: {same}")


if __name__ == "__main__":
    main()
