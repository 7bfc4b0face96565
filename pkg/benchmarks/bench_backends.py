#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths on a realistic workload:
  * lattice RK4 stepping (front run, M sites x n steps)
  * profile residual evaluation (advance-delay system on a z-grid)

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from fkwaves import kernels
from fkwaves.backend import HAS_NUMBA


def time_fn(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rk4(M, n_steps, quick):
    i = np.arange(M, dtype=float)
    u = np.where(i < M // 2, 0.0, 1.0)[None, :]
    xi = u.copy()
    args = (kernels.KIND_CLASSICAL, 0.2, 0.0, 0.0, 100.0, kernels.BC_FIXED,
            0.005, n_steps, n_steps)
    rows = []
    t_np = time_fn(lambda: kernels.rk4_run_numpy(u, xi, *args),
                   repeat=1 if quick else 2)
    rows.append(("numpy", t_np))
    if HAS_NUMBA:
        kernels.rk4_run_numba(u, xi, *(args[:-2] + (64, 64)))  # compile
        t_nb = time_fn(lambda: kernels.rk4_run_numba(u, xi, *args))
        rows.append(("numba", t_nb))
        # the two paths must agree on the final state
        a = kernels.rk4_run_numpy(u, xi, *args)[0][-1]
        b = kernels.rk4_run_numba(u, xi, *args)[0][-1]
        assert np.allclose(a, b, atol=1e-12), "backends disagree"
    return rows


def bench_residual(K, n_eval, quick):
    rng = np.random.default_rng(0)
    phi1 = np.sort(rng.uniform(0, 1, K))
    phi2 = np.clip(phi1 + rng.normal(0, 0.01, K), 0, 1)
    offs = np.array([0, 50, -50], dtype=np.int64)
    wts = np.zeros(3)
    args = (-2.1, 100.0, 0.02, offs, wts, kernels.KIND_CLASSICAL, 0.2, 0.0, 0.0)
    n = n_eval // 10 if quick else n_eval

    def run_np():
        for _ in range(n):
            kernels.profile_residual_numpy(phi1, phi2, *args)

    rows = [("numpy", time_fn(run_np) / n)]
    if HAS_NUMBA:
        kernels.profile_residual_numba(phi1, phi2, *args)  # compile

        def run_nb():
            for _ in range(n):
                kernels.profile_residual_numba(phi1, phi2, *args)

        rows.append(("numba", time_fn(run_nb) / n))
    return rows


def report(title, rows, unit="s"):
    print(f"\n{title}")
    base = rows[0][1]
    for name, t in rows:
        speedup = base / t if t > 0 else float("inf")
        print(f"  {name:6s} {t:10.4g} {unit}   ({speedup:5.1f}x vs numpy)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()

    n_steps = 4000 if args.quick else 40000
    print(f"numba available: {HAS_NUMBA}")
    report(f"lattice RK4, M=400, {n_steps} steps",
           bench_rk4(400, n_steps, args.quick))
    report("profile residual, K=4001 (per evaluation)",
           bench_residual(4001, 2000, args.quick))


if __name__ == "__main__":
    main()
