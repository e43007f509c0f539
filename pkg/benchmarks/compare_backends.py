#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Runs the two-pass attention at a range of sequence lengths on every available
backend, reports median wall times and the max output deviation between
backends, and writes an optional CSV. Wall times are machine facts, not
assertions; the numpy fallback rides multithreaded BLAS and can win at large
L, which is exactly the kind of thing this script is for.

Usage: python benchmarks/compare_backends.py [--lens 256,1024,4096] [--dim 64]
           [--repeats 5] [--out backends.csv]
"""

import argparse
import time

import numpy as np

from shiftrope import AttentionInputs, Matrix, RopeConfig, shifted_attention
from shiftrope.kernels import available_backends
from shiftrope.posmap import ShiftParams


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lens", default="256,1024,4096")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--window", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    lengths = [int(s) for s in args.lens.split(",")]
    backends = available_backends()
    rows = []
    print(f"backends: {', '.join(backends)}")
    for L in lengths:
        params = ShiftParams(L, max(L // 3, args.window + 1), args.window)
        rng = np.random.default_rng(args.seed)
        mats = [
            Matrix.from_array(rng.standard_normal((L, args.dim))) for _ in range(3)
        ]
        inputs = AttentionInputs(*mats, rope=RopeConfig(args.dim))
        outputs = {}
        for backend in backends:
            times = []
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                outputs[backend] = shifted_attention(inputs, params, backend=backend)
                times.append((time.perf_counter() - t0) * 1e3)
            median = float(np.median(times))
            rows.append((L, backend, median))
            print(f"L={L:6d}  {backend:7s}  median {median:9.2f} ms")
        if len(backends) == 2:
            a, b = (outputs[name].array for name in backends)
            dev = float(np.max(np.abs(a - b)))
            print(f"L={L:6d}  max abs deviation between backends: {dev:.2e}")
            assert dev <= 1e-12, "backends disagree beyond rounding"

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("L,backend,median_ms\n")
            for L, backend, median in rows:
                fh.write(f"{L},{backend},{median:.3f}\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
