"""Compare the numba kernels against the pure-numpy fallback.

The backend is fixed at import time by the NARM_BACKEND environment
variable, so this script re-runs itself in a subprocess per backend and
prints a side-by-side table.

Usage: python3 benchmarks/bench_backends.py
"""

import json
import os
import subprocess
import sys
import time

import numpy as np


def _bench_kernels(n_reps=5):
    from narm import kernels
    from narm.backend import backend_name

    kernels.warmup()
    rng = np.random.default_rng(7)
    n, k, n_edges = 2000, 16, 12000

    rows = rng.integers(0, n - 1, size=n_edges).astype(np.int64)
    cols = (rows + 1 + rng.integers(0, n - 2, size=n_edges)) % n
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    rows, cols = lo.astype(np.int64), hi.astype(np.int64)
    totals = rng.poisson(2.0, size=n_edges).astype(np.int64) + 1
    phi = rng.gamma(1.0, size=(n, k))
    lam = rng.gamma(1.0, size=(k, k))
    lam = np.triu(lam) + np.triu(lam, 1).T
    u = rng.random(int(totals.sum()))

    counts = rng.poisson(3.0, size=n * k).astype(np.int64)
    conc = rng.gamma(1.0, size=n * k)
    u_crt = rng.random(int(counts.sum()))

    nnz = 10 * n
    indptr = np.linspace(0, nnz, n + 1).astype(np.int64)
    attr_ids = rng.integers(0, 200, size=nnz).astype(np.int64)
    h = rng.gamma(1.0, size=(200, k))
    b = rng.gamma(1.0, size=k)

    timings = {}

    def run(name, fn, *args):
        best = np.inf
        for _ in range(n_reps):
            t0 = time.perf_counter()
            fn(*args)
            best = min(best, time.perf_counter() - t0)
        timings[name] = best

    run("crt_tables", kernels.crt_tables, counts, conc, u_crt, 0)
    run("alloc_pairs", kernels.alloc_pairs, rows, cols, totals, phi, lam, u)
    run("alloc_directed", kernels.alloc_directed, rows, cols, totals,
        phi, phi / phi.sum(axis=0), u)
    run("compute_shapes", kernels.compute_shapes, indptr, attr_ids, h, b)
    run("seq_phi_update", kernels.seq_phi_update, rng.gamma(1.0, size=(n, k)),
        np.ones(n), lam, phi.copy(), phi.sum(axis=0))
    return backend_name(), timings


def main():
    if os.environ.get("_NARM_BENCH_CHILD"):
        name, timings = _bench_kernels()
        print(json.dumps({"backend": name, "timings": timings}))
        return

    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, NARM_BACKEND=backend, _NARM_BENCH_CHILD="1")
        proc = subprocess.run([sys.executable, os.path.abspath(__file__)],
                              env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{backend} run failed:\n{proc.stderr}", file=sys.stderr)
            sys.exit(1)
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        results[backend] = payload["timings"]

    kernels = sorted(results["numpy"])
    width = max(len(k) for k in kernels)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for k in kernels:
        tn = results["numpy"][k]
        tb = results["numba"][k]
        print(f"{k:<{width}}  {tn * 1e3:>8.2f}ms  {tb * 1e3:>8.2f}ms  "
              f"{tn / tb:>7.1f}x")


if __name__ == "__main__":
    main()
