#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Times the three hot kernels on a synthetic zone block (sizes typical of one
zone) and a full greedy correction on a two-zone network under each backend.

Usage: python benchmarks/bench_kernels.py [--rows 60] [--rank 30] [--repeat 2000]
"""

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

import pmucorrect._kernels as kernels
from pmucorrect import (
    AttackVector,
    CorrectionConfig,
    apply_attack,
    build_measurement_system,
    build_projection,
    compute_zones,
    flat_state,
    generate_measurements,
    generate_synthetic_network,
    greedy_correct,
    sample_state,
    set_tau,
)

DEG = np.pi / 180.0


def timeit(fn, repeat):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def kernel_benchmarks(rows, rank, n_pmus, repeat):
    rng = np.random.default_rng(0)
    a = rng.normal(size=(rows, rank)) + 1j * rng.normal(size=(rows, rank))
    q, _ = np.linalg.qr(a)
    q = np.asfortranarray(q)
    z = rng.normal(size=rows) + 1j * rng.normal(size=rows)
    row_pmu = np.sort(rng.integers(0, n_pmus, rows)).astype(np.int64)
    alpha = rng.uniform(-np.pi, np.pi, n_pmus)
    slots = list(range(min(4, n_pmus)))
    sup_rows = np.concatenate([np.flatnonzero(row_pmu == t) for t in slots]).astype(
        np.int64
    )
    sup_indptr = np.concatenate(
        [[0], np.cumsum([np.count_nonzero(row_pmu == t) for t in slots])]
    ).astype(np.int64)

    results = {}
    for name in kernels.available():
        mod = kernels._BACKENDS[name]
        w = mod.rotate(z, row_pmu, alpha)
        results[name] = {
            "rotate": timeit(lambda: mod.rotate(z, row_pmu, alpha), repeat),
            "project_out": timeit(lambda: mod.project_out(q, w), repeat),
            "pmu_norms_sq": timeit(lambda: mod.pmu_norms_sq(w, row_pmu, n_pmus), repeat),
            "lm_jacobian": timeit(
                lambda: mod.lm_jacobian(q, w, sup_rows, sup_indptr), repeat
            ),
        }
    return results


def greedy_benchmark(repeat=5):
    net = generate_synthetic_network([7, 14], rng_seed=2024)
    ms = build_measurement_system(net)
    zp = compute_zones(net)
    proj = build_projection(ms, zp)
    rng = np.random.default_rng(1)
    x = sample_state(flat_state(net.n_buses), 0.01, 0.1, rng)
    z = generate_measurements(ms, x, 0.001, rng)
    alpha = np.zeros(21)
    spoofed = [zp.zones[0].pmu_indices[0], *zp.zones[1].pmu_indices[:3]]
    alpha[spoofed] = rng.choice([-1, 1], len(spoofed)) * rng.uniform(
        16 * DEG, 24 * DEG, len(spoofed)
    )
    z_bar = apply_attack(z, AttackVector(alpha), ms)
    cfg = CorrectionConfig(tau=set_tau(proj, 0.001, 0.99))

    results = {}
    previous = kernels.active_name()
    try:
        for name in kernels.available():
            kernels.use(name)
            results[name] = timeit(
                lambda: greedy_correct(z_bar, ms, zp, proj, cfg), repeat
            )
    finally:
        kernels.use(previous)
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=60)
    parser.add_argument("--rank", type=int, default=30)
    parser.add_argument("--pmus", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=2000)
    args = parser.parse_args()

    print(f"kernel backends built: {kernels.available()}")
    print("BLAS pinned to one thread (zone blocks are too small to benefit)")
    print(
        f"\nPer-kernel timings (zone of {args.rows} rows, rank {args.rank}, "
        f"{args.pmus} PMUs; mean of {args.repeat} calls):"
    )
    per_kernel = kernel_benchmarks(args.rows, args.rank, args.pmus, args.repeat)
    names = sorted(per_kernel)
    header = f"{'kernel':<14}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kern in ("rotate", "project_out", "pmu_norms_sq", "lm_jacobian"):
        row = f"{kern:<14}"
        times = [per_kernel[n][kern] for n in names]
        row += "".join(f"{t * 1e6:>10.2f}us" for t in times)
        if len(times) == 2:
            slow, fast = max(times), min(times)
            row += f"{slow / fast:>9.1f}x"
        print(row)

    print("\nEnd-to-end greedy correction (two zones, 21 PMUs, 4 spoofed):")
    for name, t in sorted(greedy_benchmark(repeat=40).items()):
        print(f"  {name:<8} {t * 1e3:8.2f} ms/run")


if __name__ == "__main__":
    with threadpool_limits(limits=1):
        main()
