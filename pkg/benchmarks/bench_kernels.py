"""Benchmark the compiled kernels against the pure-numpy fallback.

The fallback is selected by PREFALIGN_NO_NUMBA=1 at import time, so this
script times the compiled path in-process and re-runs itself in a
subprocess with the flag set to time the fallback. Both paths must produce
bit-identical results; the point of the comparison is speed only.

Usage: python benchmarks/bench_kernels.py
"""
import json
import os
import subprocess
import sys
import time

import numpy as np


def time_workload():
    from prefalign._kernels import HAS_NUMBA, lasso_cd, walk_test

    # Warm up compilation before timing.
    walk_test(0.7, 0.1, 1000, 1, 0)
    g = np.eye(4)
    lasso_cd(g, np.ones(4), 0.1, np.zeros(4), 100, 1e-8)

    start = time.perf_counter()
    total = 0
    for i in range(200):
        sign, m, s, crossed = walk_test(0.55, 0.1, 200_000, 42, i * 1_000_000)
        total += m
    walk_time = time.perf_counter() - start

    rng = np.random.default_rng(0)
    n, d = 400, 300
    X = rng.standard_normal((n, d))
    beta = np.zeros(d)
    beta[:10] = rng.uniform(0.5, 1.5, 10)
    y = X @ beta + rng.standard_normal(n)
    gram = X.T @ X / n
    cov = X.T @ y / n
    start = time.perf_counter()
    checksum = 0.0
    for lam in np.linspace(0.3, 0.02, 20):
        w = np.zeros(d)
        lasso_cd(gram, cov, float(lam), w, 10_000, 1e-8)
        checksum += float(np.abs(w).sum())
    lasso_time = time.perf_counter() - start

    return {"jit": HAS_NUMBA and os.environ.get("PREFALIGN_NO_NUMBA", "") != "1",
            "walk_steps": total, "walk_time": walk_time,
            "lasso_checksum": checksum, "lasso_time": lasso_time}


def main():
    here = time_workload()
    mode = "numba" if here["jit"] else "numpy"
    print(f"[{mode}] walk: {here['walk_time']:.3f}s ({here['walk_steps']} steps)  "
          f"lasso: {here['lasso_time']:.3f}s")

    if not here["jit"]:
        return

    env = dict(os.environ, PREFALIGN_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, __file__, "--emit-json"],
        env=env, capture_output=True, text=True, check=True)
    other = json.loads(out.stdout.strip().splitlines()[-1])
    print(f"[numpy] walk: {other['walk_time']:.3f}s  lasso: {other['lasso_time']:.3f}s")

    same_walk = other["walk_steps"] == here["walk_steps"]
    same_lasso = abs(other["lasso_checksum"] - here["lasso_checksum"]) < 1e-9
    print(f"results identical: walk={same_walk} lasso={same_lasso}")
    print(f"speedup: walk {other['walk_time'] / here['walk_time']:.1f}x  "
          f"lasso {other['lasso_time'] / here['lasso_time']:.1f}x")


if __name__ == "__main__":
    if "--emit-json" in sys.argv:
        print(json.dumps(time_workload()))
    else:
        main()
