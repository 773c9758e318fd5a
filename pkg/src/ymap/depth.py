"""Surface normals from depth and iterative normal-guided depth refinement.

Sign conventions: image x grows rightward, y grows downward; gradients come
from standard (unnormalized) 3x3 Sobel kernels with edge replication, so a
ramp of slope c responds with gradient 8c. Normals point toward the camera
(nz > 0).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

EPSILON = 1e-6
FAR_MASK_THRESHOLD = 0.05


@dataclass(frozen=True)
class RefineParams:
    iterations: int = 35
    alpha: float = 0.01
    far_mask_threshold: float = FAR_MASK_THRESHOLD

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")


def sobel_gradients(depth):
    """Standard 3x3 Sobel gradients (gx, gy) with replicated borders."""
    depth = np.asarray(depth)
    if depth.ndim != 2 or depth.shape[0] < 3 or depth.shape[1] < 3:
        raise ValueError(f"need a 2-D grid of at least 3x3, got shape {depth.shape}")
    return kernels.sobel3x3(depth)


def normals_from_depth(depth, epsilon=EPSILON):
    """Per-pixel unit normals n = (-gx, -gy, 1) / sqrt(gx^2 + gy^2 + 1 + eps).

    Returns a (3, H, W) float32 map; the epsilon regularization keeps the
    norm within epsilon/2 of 1.
    """
    gx, gy = sobel_gradients(depth)
    inv = 1.0 / np.sqrt(gx * gx + gy * gy + 1.0 + epsilon)
    out = np.empty((3,) + depth.shape, dtype=np.float32)
    out[0] = -gx * inv
    out[1] = -gy * inv
    out[2] = inv
    return out


def refine_depth(depth, normals, params=RefineParams(), return_history=False):
    """Pull a depth map toward consistency with a fixed normal map.

    Each iteration normalizes the current depth gradients by
    m = sqrt(gx^2 + gy^2 + 1), takes the mismatch against the target
    normals, and applies d += alpha * (dx*gx + dy*gy + dz). Pixels whose
    *input* depth is below far_mask_threshold are never touched. The final
    result is clamped to [0, 1] (masked pixels keep their exact input
    bits). With return_history=True also returns the per-iteration mean
    mismatch magnitude.
    """
    depth = np.asarray(depth)
    normals = np.asarray(normals)
    if depth.ndim != 2:
        raise ValueError(f"depth must be 2-D, got shape {depth.shape}")
    if normals.shape != (3,) + depth.shape:
        raise ValueError(f"normals shape {normals.shape} does not match depth {depth.shape}")
    if not (np.isfinite(depth).all() and np.isfinite(normals).all()):
        raise ValueError("non-finite values in depth or normals")

    frozen = depth < params.far_mask_threshold
    work = depth.astype(np.float64)
    hist = np.zeros(max(params.iterations, 1), dtype=np.float64)
    if params.iterations > 0:
        refined = kernels.refine_depth_loop(
            work,
            normals[0].astype(np.float64),
            normals[1].astype(np.float64),
            normals[2].astype(np.float64),
            frozen,
            params.iterations,
            float(params.alpha),
            hist,
        )
    else:
        refined = work
    out = np.clip(refined, 0.0, 1.0).astype(depth.dtype)
    out[frozen] = depth[frozen]
    if return_history:
        return out, hist[: params.iterations]
    return out
