#!/usr/bin/env python3
"""Timing of the hot numeric kernels, JIT versus pure-Python fallback.

The package compiles its inner loops with numba unless FRACLAT_NUMBA=0.
Run `python benchmarks/bench_kernels.py --both` to print a CSV comparing
the two modes (the script re-executes itself in a subprocess with the
fallback flag); plain invocation times the current mode only.

Cases:
    kernel_1d      closed-form kernel, 200k offsets
    kernel_nd      adaptive quadrature, 200 two-dimensional offsets
    kernel_table   shared-grid dense 2D table, radius 60
    torus_apply    pointwise torus operator, d=2, N=10
    commutator     conjugated-operator commutator identity, d=2
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench_kernel_1d():
    from fraclat import FracParams, kernel_1d

    p = FracParams(0.5)
    kernel_1d(p, 1)
    t0 = time.perf_counter()
    acc = 0.0
    for m in range(1, 200001):
        acc += kernel_1d(p, m)
    return time.perf_counter() - t0, acc


def bench_kernel_nd():
    from fraclat import FracParams, kernel_nd

    p = FracParams(0.5, 1.0, 2)
    kernel_nd(p, (1, 1), tol=1e-8)
    rng = np.random.default_rng(0)
    offs = rng.integers(1, 40, size=(200, 2))
    t0 = time.perf_counter()
    acc = 0.0
    for off in offs:
        acc += kernel_nd(p, off, tol=1e-8)
    return time.perf_counter() - t0, acc


def bench_kernel_table():
    from fraclat import FracParams, build_kernel_table

    p = FracParams(0.5, 1.0, 2)
    build_kernel_table(p, 8)
    t0 = time.perf_counter()
    table = build_kernel_table(FracParams(0.45, 1.0, 2), 60)
    return time.perf_counter() - t0, float(table.values.sum())


def bench_torus_apply():
    from fraclat import TorusFunction, apply_frac_torus_pointwise

    rng = np.random.default_rng(1)
    v = TorusFunction(10, 2, rng.standard_normal((21, 21)))
    apply_frac_torus_pointwise(v, 0.5)
    t0 = time.perf_counter()
    out = apply_frac_torus_pointwise(v, 0.5)
    return time.perf_counter() - t0, float(out.values.sum())


def bench_commutator():
    from fraclat import CarlemanConfig, tangential_commutator_check

    cfg = CarlemanConfig(c0=4.0, tau=4.0, h=0.1)
    rng = np.random.default_rng(2)
    v = {(i, j): float(rng.standard_normal())
         for i in range(-8, 9) for j in range(-8, 9)}
    tangential_commutator_check(cfg, v)
    t0 = time.perf_counter()
    lhs, rhs, defect = tangential_commutator_check(cfg, v)
    return time.perf_counter() - t0, defect


CASES = {
    "kernel_1d": bench_kernel_1d,
    "kernel_nd": bench_kernel_nd,
    "kernel_table": bench_kernel_table,
    "torus_apply": bench_torus_apply,
    "commutator": bench_commutator,
}


def run_current(cases):
    import fraclat

    mode = "numba" if fraclat.JIT_ENABLED else "fallback"
    for name in cases:
        seconds, checksum = CASES[name]()
        print(f"{name},{mode},{seconds:.4f},{checksum!r}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--both", action="store_true",
                        help="also run the FRACLAT_NUMBA=0 fallback in a subprocess")
    parser.add_argument("--cases", default=",".join(CASES),
                        help="comma separated case names")
    args = parser.parse_args()
    cases = [c for c in args.cases.split(",") if c]
    unknown = set(cases) - set(CASES)
    if unknown:
        parser.error(f"unknown cases: {sorted(unknown)}")
    print("case,mode,seconds,checksum")
    run_current(cases)
    if args.both:
        env = dict(os.environ, FRACLAT_NUMBA="0")
        cmd = [sys.executable, __file__, "--cases", ",".join(cases)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True)
        for line in out.stdout.splitlines():
            if line and not line.startswith("case,"):
                print(line)
        if out.returncode != 0:
            print(out.stderr, file=sys.stderr)
            return out.returncode
    return 0


if __name__ == "__main__":
    sys.exit(main())
