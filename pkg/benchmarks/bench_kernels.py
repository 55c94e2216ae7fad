#!/usr/bin/env python3
"""Benchmark the compiled scheduling kernel against the numpy fallback.

Times each pipeline stage (randomness, codebooks, projections, decisions)
and the end-to-end frame rate for both backends, and verifies that the two
kernels produce bit-identical outputs on the benchmarked batches.

Usage: python benchmarks/bench_kernels.py [--frames N] [--batch B]
"""

import argparse
import time

import numpy as np

from qacs import backend
from qacs._engine import EngineInputs, batch_generator, draw_batch_projections, run_batch
from qacs.model import ScenarioConfig
from qacs.simkit import drop_budget


def best_of(fn, repeats=5):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=200_000)
    ap.add_argument("--batch", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    cfg = ScenarioConfig(mbs_fap_distance=100.0)
    inputs = EngineInputs.from_config(cfg, drop_budget(cfg, 0))
    kernels = backend.available_kernels()
    print(f"kernels available: {sorted(kernels)} "
          f"(default: {'compiled' if backend.HAVE_COMPILED else 'python'})")

    # stage timing on one batch
    rng = batch_generator(args.seed, 0, 0)
    arrays = draw_batch_projections(inputs, rng, args.batch)
    t_draw = best_of(lambda: draw_batch_projections(
        inputs, batch_generator(args.seed, 0, 1), args.batch))
    print(f"\nchannel + projections: {t_draw * 1e3:8.1f} ms / {args.batch} frames")

    kernel_args = (*arrays, inputs.lam_f, inputs.mu_f, inputs.lam_m, inputs.mu_m,
                   inputs.gamma_f, inputs.gamma_m)
    outs = {}
    for name, mod in sorted(kernels.items()):
        t = best_of(lambda m=mod: m.schedule_batch(*kernel_args))
        outs[name] = mod.schedule_batch(*kernel_args)
        print(f"decision kernel [{name:8s}]: {t * 1e3:8.1f} ms / {args.batch} frames")
    if len(outs) == 2:
        same = all(np.array_equal(a, b, equal_nan=True)
                   for a, b in zip(outs["compiled"], outs["python"]))
        print(f"kernel outputs bit-identical: {same}")

    # end-to-end frame rate
    n_batches = max(1, args.frames // args.batch)
    print(f"\nend-to-end over {n_batches * args.batch} frames:")
    for name, mod in sorted(kernels.items()):
        t0 = time.perf_counter()
        for b in range(n_batches):
            run_batch(inputs, batch_generator(args.seed, 0, b), args.batch, mod)
        dt = time.perf_counter() - t0
        print(f"  [{name:8s}] {dt:6.1f} s  ->  {n_batches * args.batch / dt:10,.0f} frames/s")


if __name__ == "__main__":
    main()
