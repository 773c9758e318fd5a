"""Hot raster kernels with two interchangeable backends.

The numba backend is used when importable; set YMAP_PURE_NUMPY=1 to force
the pure-numpy fallback (same semantics, no JIT). `BACKEND` reports which
one is active; `benchmarks/bench_kernels.py` compares the two.
"""

import os

_FORCE_NUMPY = os.environ.get("YMAP_PURE_NUMPY", "").lower() in ("1", "true", "yes")

if _FORCE_NUMPY:
    from . import _numpy_impl as _impl
else:
    try:
        from . import _numba_impl as _impl
    except ImportError:
        from . import _numpy_impl as _impl

BACKEND = _impl.BACKEND

sobel3x3 = _impl.sobel3x3
refine_depth_loop = _impl.refine_depth_loop
splat_gaussian_max = _impl.splat_gaussian_max
splat_band_max = _impl.splat_band_max
fill_polygon_evenodd = _impl.fill_polygon_evenodd
find_peaks = _impl.find_peaks
line_mean_bilinear = _impl.line_mean_bilinear
affine_warp = _impl.affine_warp
warmup = _impl.warmup

__all__ = [
    "BACKEND",
    "sobel3x3",
    "refine_depth_loop",
    "splat_gaussian_max",
    "splat_band_max",
    "fill_polygon_evenodd",
    "find_peaks",
    "line_mean_bilinear",
    "affine_warp",
    "warmup",
]
