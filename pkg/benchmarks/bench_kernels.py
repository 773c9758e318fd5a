#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py [--repeats N]
Imports both backend modules directly, so it works regardless of the
YMAP_PURE_NUMPY setting.
"""

import argparse
import time

import numpy as np

from ymap.kernels import _numba_impl, _numpy_impl

FRAME = 256


def _timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(rng):
    depth = rng.random((FRAME, FRAME))
    nx, ny = rng.uniform(-0.2, 0.2, (2, FRAME, FRAME))
    nz = np.sqrt(np.clip(1 - nx ** 2 - ny ** 2, 0, None))
    frozen = depth < 0.05
    heat = rng.random((FRAME, FRAME))
    heat[heat < 0.85] = 0.0
    chans = rng.random((44, FRAME, FRAME)).astype(np.float32)
    poly_x = rng.uniform(5, FRAME - 5, 8)
    poly_y = rng.uniform(5, FRAME - 5, 8)

    def cases(impl):
        return {
            "sobel3x3 256^2": lambda: impl.sobel3x3(depth),
            "refine 35 iters 256^2": lambda: impl.refine_depth_loop(
                depth, nx, ny, nz, frozen, 35, 0.01, np.zeros(35)
            ),
            "gaussian splat x100": lambda: [
                impl.splat_gaussian_max(
                    np.zeros((FRAME, FRAME), np.float32), 128.3, 97.2, 23, 5.75
                )
                for _ in range(100)
            ],
            "band splat x100": lambda: [
                impl.splat_band_max(
                    np.zeros((FRAME, FRAME), np.float32), 30.0, 40.0, 220.0, 180.0, 6.0
                )
                for _ in range(100)
            ],
            "polygon fill 256^2": lambda: impl.fill_polygon_evenodd(
                poly_x, poly_y, np.zeros((FRAME, FRAME), np.float32)
            ),
            "find peaks 256^2": lambda: impl.find_peaks(heat, 0.5),
            "line mean x1000": lambda: [
                impl.line_mean_bilinear(heat, 10.0, 10.0, 240.0, 200.0, 10)
                for _ in range(1000)
            ],
            "warp 44ch 256^2": lambda: impl.affine_warp(chans, 0.93, 4.0, -3.0, FRAME, FRAME),
        }

    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    print("warming up JIT compilation...")
    _numba_impl.warmup()
    for fn in cases(_numba_impl).values():
        fn()

    numba_cases = cases(_numba_impl)
    numpy_cases = cases(_numpy_impl)

    print(f"\n{'kernel':<24} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    print("-" * 60)
    for name in numba_cases:
        t_np = _timeit(numpy_cases[name], args.repeats) * 1e3
        t_nb = _timeit(numba_cases[name], args.repeats) * 1e3
        print(f"{name:<24} {t_np:>12.3f} {t_nb:>12.3f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
