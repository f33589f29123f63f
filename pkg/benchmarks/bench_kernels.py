#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python3 benchmarks/bench_kernels.py
The backend in effect for library code is chosen by MRENC_BACKEND; this
script always times both implementations side by side.
"""

import time

import numpy as np

from mrenc import kernels


def timeit(fn, *args, repeats=30):
    fn(*args)  # warm-up (numba compiles on first call)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_relu(rng, n_points, n_samples):
    thetas = rng.uniform(-1, 1, size=(n_points, 4))
    xs = np.clip(rng.standard_normal((n_samples, 2)), -3, 3)
    ys = rng.normal(size=n_samples)
    args = (thetas, xs, ys, 0.01)
    ref = kernels.relu_mean_loss_numpy(*args)
    if kernels.backend() == "numba":
        np.testing.assert_allclose(kernels.relu_mean_loss(*args), ref, rtol=1e-12)
    t_np = timeit(kernels.relu_mean_loss_numpy, *args)
    t_sel = timeit(kernels.relu_mean_loss, *args)
    return t_np, t_sel


def bench_sign_grid(rng, n_points, g, d):
    weights = rng.uniform(-1, 1, size=g**d)
    thetas = rng.uniform(-1, 1, size=(n_points, d))
    args = (thetas, weights, -1.0 + 1.0 / g, 2.0 / g, g, 1.0 / g)
    ref = kernels.sign_grid_mean_loss_numpy(*args)
    if kernels.backend() == "numba":
        np.testing.assert_allclose(kernels.sign_grid_mean_loss(*args), ref, rtol=1e-12)
    t_np = timeit(kernels.sign_grid_mean_loss_numpy, *args)
    t_sel = timeit(kernels.sign_grid_mean_loss, *args)
    return t_np, t_sel


def main():
    rng = np.random.default_rng(0)
    print(f"selected backend: {kernels.backend()}")
    print(f"{'kernel':<34}{'numpy':>10}{'selected':>10}{'speedup':>9}")
    for n_points, n_samples in [(10_000, 5), (100_000, 5), (10_000, 200)]:
        t_np, t_sel = bench_relu(rng, n_points, n_samples)
        name = f"relu loss ({n_points} pts x {n_samples} samp)"
        print(f"{name:<34}{t_np * 1e3:>8.2f}ms{t_sel * 1e3:>8.2f}ms{t_np / t_sel:>8.1f}x")
    for n_points, g, d in [(10_000, 64, 2), (100_000, 8, 2), (100_000, 4, 3)]:
        t_np, t_sel = bench_sign_grid(rng, n_points, g, d)
        name = f"sign grid ({n_points} pts, g={g}, d={d})"
        print(f"{name:<34}{t_np * 1e3:>8.2f}ms{t_sel * 1e3:>8.2f}ms{t_np / t_sel:>8.1f}x")


if __name__ == "__main__":
    main()
