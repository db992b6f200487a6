#!/usr/bin/env python3
"""Benchmark the JIT kernels against the pure-Python fallback.

The fallback executes the same source with SEPHYDRO_NUMBA=0, so this script
re-runs itself in a subprocess for each backend and prints a comparison
table.  Workloads are sized so the fallback finishes in seconds.

    python benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time


def workload():
    import numpy as np

    from sephydro import kernels
    from sephydro._backend import backend_name
    from sephydro.domain import build_domain
    from sephydro.process import ProcessParams, run_replica

    results = {"backend": backend_name()}

    dom = build_domain(2, 3, 16)
    params = ProcessParams(m=2, alpha=1.0)
    # warm up JIT compilation outside the timed section
    run_replica(dom, params, 0.5, 1)
    t0 = time.perf_counter()
    cfg = run_replica(dom, params, 400.0, 12345)
    results["sep_run_s"] = time.perf_counter() - t0
    results["sep_particles"] = cfg.n_particles

    with kernels.kernel_guard():
        kernels.dual_walk_batch(dom.cls, dom.strides, 2, 2,
                                int(dom.flatten((5, 0))), 1.0, 10,
                                np.uint64(7), np.uint64(0), 0)
        t0 = time.perf_counter()
        hits, _, _ = kernels.dual_walk_batch(
            dom.cls, dom.strides, 2, 2, int(dom.flatten((5, 0))), 50.0,
            4000, np.uint64(7), np.uint64(0), 0)
        results["dual_walk_s"] = time.perf_counter() - t0
        results["dual_hits"] = int(hits)

        xs, ws = np.polynomial.legendre.leggauss(24)
        kernels.kv_quad_scaled(0.0, complex(2.0, 1.0), xs, ws, 1.0)
        t0 = time.perf_counter()
        acc = 0.0
        for k in range(200):
            acc += kernels.kv_quad_scaled(0.0, complex(2.0 + 0.01 * k, 1.0),
                                          xs, ws, 1.0).real
        results["kv_quad_s"] = time.perf_counter() - t0
        results["kv_checksum"] = acc
    print(json.dumps(results))


def main():
    rows = []
    for flag in ("1", "0"):
        env = dict(os.environ, SEPHYDRO_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--workload"],
            env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
    jit, py = rows
    print(f"{'kernel':<12} {'numba':>10} {'python':>10} {'speedup':>9}")
    for key, label in [("sep_run_s", "sep_run"), ("dual_walk_s", "dual_walk"),
                       ("kv_quad_s", "kv_quad")]:
        print(f"{label:<12} {jit[key]:>9.3f}s {py[key]:>9.3f}s "
              f"{py[key] / jit[key]:>8.1f}x")
    for key in ("sep_particles", "dual_hits"):
        if jit[key] != py[key]:
            raise SystemExit(f"backend mismatch on {key}: "
                             f"{jit[key]} vs {py[key]}")
    if abs(jit["kv_checksum"] - py["kv_checksum"]) > 1e-9:
        raise SystemExit("kv_quad checksums differ between backends")
    print("backends agree on all workload outputs")


if __name__ == "__main__":
    if "--workload" in sys.argv:
        workload()
    else:
        main()
