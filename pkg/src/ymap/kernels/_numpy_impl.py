"""Pure-numpy implementations of the hot raster kernels.

This module is the reference semantics; the numba backend must agree with
it (exactly for integer/boolean outputs, to float rounding for the rest).
All coordinates follow the package convention: x grows rightward (columns),
y grows downward (rows).
"""

import numpy as np

BACKEND = "numpy"


def sobel3x3(src):
    """3x3 Sobel gradients with edge replication. Returns (gx, gy)."""
    p = np.pad(src, 1, mode="edge")
    tl, tc, tr = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    ml, mr = p[1:-1, :-2], p[1:-1, 2:]
    bl, bc, br = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)
    gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)
    return gx, gy


def refine_depth_loop(depth, nx, ny, nz, frozen, iters, alpha, delta_hist):
    """Iterative normal-guided depth update.

    Per iteration: gradients of the current map are normalized by
    m = sqrt(gx^2 + gy^2 + 1), compared against the target normals, and the
    mismatch is fed back as d += alpha * (dx*gx + dy*gy + dz). Pixels where
    `frozen` is true are never written. `delta_hist` (length >= iters)
    receives the mean mismatch magnitude of each iteration.
    """
    d = depth.copy()
    live = ~frozen
    for it in range(iters):
        gx, gy = sobel3x3(d)
        m = np.sqrt(gx * gx + gy * gy + 1.0)
        dx = nx - gx / m
        dy = ny - gy / m
        dz = nz - 1.0 / m
        delta_hist[it] = np.mean(np.sqrt(dx * dx + dy * dy + dz * dz))
        d = np.where(live, d + alpha * (dx * gx + dy * gy + dz), d)
    return d


def splat_gaussian_max(channel, fx, fy, size, sigma):
    """Write an unnormalized Gaussian blob into `channel` by per-pixel max.

    The blob is centered at the (possibly fractional) point (fx, fy) and
    restricted to a size x size window around the rounded center, so its
    value is exactly 1.0 when the center sits on an integer pixel.
    """
    h, w = channel.shape
    cx = int(np.floor(fx + 0.5))
    cy = int(np.floor(fy + 0.5))
    lo = (size - 1) // 2
    hi = size // 2
    x0, x1 = max(cx - lo, 0), min(cx + hi, w - 1)
    y0, y1 = max(cy - lo, 0), min(cy + hi, h - 1)
    if x0 > x1 or y0 > y1:
        return
    xs = np.arange(x0, x1 + 1, dtype=np.float64) - fx
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - fy
    g = np.exp(-(xs[None, :] ** 2 + ys[:, None] ** 2) / (2.0 * sigma * sigma))
    region = channel[y0 : y1 + 1, x0 : x1 + 1]
    np.maximum(region, g.astype(channel.dtype), out=region)


def splat_band_max(channel, ax, ay, bx, by, width):
    """Mark a straight band of `width` pixels between two joints with 1.0.

    Pixels are sampled at integer coordinates. A pixel is inside the band
    when its projection onto the segment lies in [0, L] and its signed
    offset along the left normal lies in [-width/2, width/2). The half-open
    offset range yields exactly `width` rows for an axis-aligned limb.
    """
    h, w = channel.shape
    dx, dy = bx - ax, by - ay
    length = np.hypot(dx, dy)
    if length == 0.0:
        return
    ux, uy = dx / length, dy / length
    hw = width / 2.0
    pad = hw + 1.0
    x0 = max(int(np.floor(min(ax, bx) - pad)), 0)
    x1 = min(int(np.ceil(max(ax, bx) + pad)), w - 1)
    y0 = max(int(np.floor(min(ay, by) - pad)), 0)
    y1 = min(int(np.ceil(max(ay, by) + pad)), h - 1)
    if x0 > x1 or y0 > y1:
        return
    xs = np.arange(x0, x1 + 1, dtype=np.float64) - ax
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - ay
    t = xs[None, :] * ux + ys[:, None] * uy
    s = xs[None, :] * (-uy) + ys[:, None] * ux
    band = (t >= 0.0) & (t <= length) & (s >= -hw) & (s < hw)
    region = channel[y0 : y1 + 1, x0 : x1 + 1]
    np.maximum(region, band.astype(channel.dtype), out=region)


def fill_polygon_evenodd(xs, ys, out):
    """Scanline even-odd polygon fill. Pixels are covered at their centers.

    A pixel (i, j) is set when its center (i + 0.5, j + 0.5) lies inside
    the polygon under the even-odd rule.
    """
    h, w = out.shape
    x2 = np.roll(xs, -1)
    y2 = np.roll(ys, -1)
    for j in range(h):
        yc = j + 0.5
        hit = ((ys <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < ys))
        if not hit.any():
            continue
        xc = xs[hit] + (yc - ys[hit]) * (x2[hit] - xs[hit]) / (y2[hit] - ys[hit])
        xc.sort()
        for k in range(0, len(xc) - 1, 2):
            a = max(int(np.ceil(xc[k] - 0.5)), 0)
            b = min(int(np.ceil(xc[k + 1] - 0.5)), w)
            if b > a:
                out[j, a:b] = 1


def find_peaks(heat, threshold):
    """Local maxima of a heatmap over 3x3 neighborhoods, value >= threshold.

    Plateau ties are broken in raster order: a peak must be strictly greater
    than the neighbors that precede it and at least equal to those that
    follow, so adjacent equal maxima yield a single peak. Returns (ys, xs).
    """
    h, w = heat.shape
    p = np.full((h + 2, w + 2), -np.inf, dtype=np.float64)
    p[1:-1, 1:-1] = heat
    c = p[1:-1, 1:-1]
    ok = c >= threshold
    for oy, ox in ((0, 0), (0, 1), (0, 2), (1, 0)):  # neighbors before in raster order
        ok &= c > p[oy : oy + h, ox : ox + w]
    for oy, ox in ((1, 2), (2, 0), (2, 1), (2, 2)):  # neighbors after
        ok &= c >= p[oy : oy + h, ox : ox + w]
    ys, xs = np.nonzero(ok)
    return ys.astype(np.int64), xs.astype(np.int64)


def line_mean_bilinear(grid, ax, ay, bx, by, samples):
    """Mean of bilinearly sampled values at evenly spaced points on a->b."""
    h, w = grid.shape
    if samples <= 1:
        ts = np.zeros(1)
    else:
        ts = np.linspace(0.0, 1.0, samples)
    px = np.clip(ax + ts * (bx - ax), 0.0, w - 1.0)
    py = np.clip(ay + ts * (by - ay), 0.0, h - 1.0)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = px - x0
    fy = py - y0
    v = (
        grid[y0, x0] * (1 - fx) * (1 - fy)
        + grid[y0, x1] * fx * (1 - fy)
        + grid[y1, x0] * (1 - fx) * fy
        + grid[y1, x1] * fx * fy
    )
    return float(v.mean())


def affine_warp(channels, scale, tx, ty, out_h, out_w):
    """Bilinear warp of planar channels through out->in mapping
    (src_x, src_y) = (scale*x + tx, scale*y + ty); outside samples are 0.
    """
    c, h, w = channels.shape
    sx = scale * np.arange(out_w, dtype=np.float64) + tx
    sy = scale * np.arange(out_h, dtype=np.float64) + ty
    gx = np.broadcast_to(sx[None, :], (out_h, out_w))
    gy = np.broadcast_to(sy[:, None], (out_h, out_w))
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    fx = gx - x0
    fy = gy - y0
    out = np.zeros((c, out_h, out_w), dtype=channels.dtype)
    for (dy, dx, wgt) in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xc = np.clip(xi, 0, w - 1)
        yc = np.clip(yi, 0, h - 1)
        contrib = wgt * valid
        for k in range(c):
            out[k] += (channels[k][yc, xc] * contrib).astype(channels.dtype, copy=False)
    return out


def warmup():
    """No-op; kept for interface parity with the jit backend."""
