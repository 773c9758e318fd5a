"""Raster conventions and bit-exact file IO.

Grids are numpy arrays in planar (channel, row, col) layout; single-channel
maps are plain 2-D (row, col) arrays. Storage dtype is float32. Value
ranges: normalized RGB lives in [0, 1]; heatmaps, masks and depth in
[0, 1]; normals and token data in [-1, 1].

Depth files are single-channel 16-bit grayscale PNGs. A raw value r encodes
normalized depth r / 65535, and larger raw values mean nearer surfaces
(normalized inverse-depth style). Tensor files are raw little-endian
float32 with a JSON sidecar {"shape": [...], "layout": "planar",
"range": [lo, hi]} stored at <path>.json.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

DEPTH_MAX = 65535


class DepthPngError(ValueError):
    """A depth PNG violated the 16-bit single-channel contract."""


class DepthBitDepthError(DepthPngError):
    """Depth PNG is not 16 bits per sample."""


class DepthChannelError(DepthPngError):
    """Depth PNG is not single-channel grayscale."""


def read_depth16(path):
    """Read a 16-bit grayscale PNG into a float32 map of raw/65535."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"depth file not found: {path}")
    img = Image.open(path)
    if img.mode in ("RGB", "RGBA", "LA", "P", "CMYK"):
        raise DepthChannelError(
            f"{path}: expected single-channel grayscale, got mode {img.mode}"
        )
    if img.mode not in ("I;16", "I;16B", "I"):
        raise DepthBitDepthError(f"{path}: expected 16-bit samples, got mode {img.mode}")
    raw = np.asarray(img)
    if raw.ndim != 2:
        raise DepthChannelError(f"{path}: expected a 2-D raster, got shape {raw.shape}")
    return raw.astype(np.float32) / DEPTH_MAX


def write_depth16(grid, path):
    """Quantize a [0, 1] map to 16 bits and write it as a grayscale PNG."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"depth grid must be 2-D, got shape {grid.shape}")
    if grid.size and (grid.min() < 0.0 or grid.max() > 1.0):
        raise ValueError("depth values must lie in [0, 1] before quantization")
    raw = np.floor(grid.astype(np.float64) * DEPTH_MAX + 0.5).astype(np.uint16)
    _atomic_save_png(Image.fromarray(raw), path)


def normalize_rgb(raw):
    """Rescale 8-bit-origin values 0..255 to float32 [0, 1]."""
    return np.asarray(raw).astype(np.float32) / 255.0


def write_tensor(path, array, value_range=None):
    """Write a float32 tensor as raw little-endian bytes plus JSON sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(array, dtype="<f4")
    if value_range is None:
        lo = float(arr.min()) if arr.size else 0.0
        hi = float(arr.max()) if arr.size else 0.0
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
    atomic_write_bytes(path, arr.tobytes())
    sidecar = {"shape": list(arr.shape), "layout": "planar", "range": [lo, hi]}
    atomic_write_bytes(sidecar_path(path), json.dumps(sidecar).encode())


def read_tensor(path):
    """Read a tensor written by write_tensor; returns (array, range)."""
    path = Path(path)
    with open(sidecar_path(path)) as fh:
        meta = json.load(fh)
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    arr = data.reshape(meta["shape"]).copy()
    return arr, tuple(meta["range"])


def sidecar_path(path):
    return Path(str(path) + ".json")


@dataclass(frozen=True)
class ScaleOffset:
    """2-D transform x' = scale*x + ox, y' = scale*y + oy.

    Covers letterboxing and the pan & zoom augmentation; keypoints, masks
    and raster channels all go through the same instance.
    """

    scale: float = 1.0
    ox: float = 0.0
    oy: float = 0.0

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts * self.scale + np.array([self.ox, self.oy])

    def apply_xy(self, x, y):
        return self.scale * x + self.ox, self.scale * y + self.oy

    def inverted(self):
        return ScaleOffset(1.0 / self.scale, -self.ox / self.scale, -self.oy / self.scale)

    def then(self, other):
        """Compose: returns the transform equivalent to other(self(p))."""
        return ScaleOffset(
            other.scale * self.scale,
            other.scale * self.ox + other.ox,
            other.scale * self.oy + other.oy,
        )

    @property
    def is_identity(self):
        return self.scale == 1.0 and self.ox == 0.0 and self.oy == 0.0


def atomic_write_bytes(path, data):
    """Write via a temp file plus rename so readers never see partial files."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _atomic_save_png(img, path):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.png")
    img.save(tmp, format="PNG")
    os.replace(tmp, path)
