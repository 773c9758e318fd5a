"""Seeded augmentation operating jointly on image, annotations and teacher
maps. Every op draws from one per-sample Generator, so (sample, seed) fully
determines the output; the applied-ops record makes each draw auditable.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coco import FRAME
from .depth import normals_from_depth
from .grids import ScaleOffset


@dataclass(frozen=True)
class AugmentConfig:
    p_panzoom: float = 0.45
    zoom_max: float = 1.10
    p_brightness: float = 0.50
    per_channel_split: float = 0.5
    max_channel_delta: float = 0.20
    p_gauss: float = 0.15
    gauss_sigma: float = 0.02
    p_burn: float = 0.50
    max_burned: int = 10
    p_noise_replace_no_person: float = 0.01
    min_joint_visible_fraction: float = 0.30
    panzoom_retries: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p_panzoom", "p_brightness", "p_gauss", "p_burn",
                     "p_noise_replace_no_person", "per_channel_split"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.zoom_max < 1.0:
            raise ValueError("zoom_max must be >= 1")
        if self.panzoom_retries < 1:
            raise ValueError("panzoom_retries must be >= 1")
        if self.max_burned < 1:
            raise ValueError("max_burned must be >= 1")


@dataclass
class AugmentSample:
    """One working sample in the 256x256 frame. Teacher maps are optional."""

    image: np.ndarray  # (3, 256, 256) float32 in [0, 1]
    skeletons: list = field(default_factory=list)
    depth: np.ndarray | None = None  # (256, 256) in [0, 1]
    normals: np.ndarray | None = None  # (3, 256, 256) in [-1, 1]
    masks: np.ndarray | None = None  # (11, 256, 256) binary-ish
    captions: list = field(default_factory=list)

    @property
    def has_persons(self):
        return len(self.skeletons) > 0


def sample_rng(master_seed, index):
    """Per-sample generator: seeded from SeedSequence((master_seed, index))."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, index)))


def check_joint_visibility(skeletons, transform, frame=FRAME):
    """Per person: fraction of annotated joints that land inside the frame."""
    fractions = []
    for skel in skeletons:
        annotated = skel.annotated_mask()
        if not annotated.any():
            fractions.append(1.0)
            continue
        pts = transform.apply(skel.joints[annotated, :2])
        inside = (
            (pts[:, 0] >= 0)
            & (pts[:, 0] < frame)
            & (pts[:, 1] >= 0)
            & (pts[:, 1] < frame)
        )
        fractions.append(float(inside.sum()) / int(annotated.sum()))
    return np.asarray(fractions)


def augment(sample, config, rng=None):
    """Apply the stochastic pipeline; returns (new sample, applied-ops record).

    Ops fire independently: pan & zoom (rejection-sampled until every
    person keeps min_joint_visible_fraction of their annotated joints, else
    skipped after panzoom_retries draws), brightness/contrast, additive
    Gaussian noise, burned pixels, and, on person-free samples only, full
    replacement of the image by uniform noise.
    """
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    out = AugmentSample(
        image=np.array(sample.image, dtype=np.float32),
        skeletons=copy.deepcopy(sample.skeletons),
        depth=None if sample.depth is None else np.array(sample.depth, dtype=np.float32),
        normals=None if sample.normals is None else np.array(sample.normals, dtype=np.float32),
        masks=None if sample.masks is None else np.array(sample.masks, dtype=np.float32),
        captions=list(sample.captions),
    )
    record = {"ops": []}

    # activation draws happen in a fixed order so each op is independent
    u = rng.random(5)
    fire_panzoom = u[0] < config.p_panzoom
    fire_brightness = u[1] < config.p_brightness
    fire_gauss = u[2] < config.p_gauss
    fire_burn = u[3] < config.p_burn
    fire_replace = (not out.has_persons) and (u[4] < config.p_noise_replace_no_person)

    if fire_panzoom:
        _op_panzoom(out, config, rng, record)
    if fire_brightness:
        _op_brightness(out, config, rng, record)
    if fire_gauss:
        _op_gauss(out, config, rng, record)
    if fire_burn:
        _op_burn(out, config, rng, record)
    if fire_replace:
        _op_noise_replace(out, rng, record)
    return out, record


def _op_panzoom(out, config, rng, record):
    frame = out.image.shape[-1]
    half = frame / 2.0
    chosen = None
    tries = 0
    for tries in range(1, config.panzoom_retries + 1):
        zoom = rng.uniform(1.0, config.zoom_max)
        max_pan = half * (zoom - 1.0)
        px = rng.uniform(-max_pan, max_pan)
        py = rng.uniform(-max_pan, max_pan)
        fwd = ScaleOffset(zoom, half + px - zoom * half, half + py - zoom * half)
        fractions = check_joint_visibility(out.skeletons, fwd, frame)
        if fractions.size == 0 or fractions.min() >= config.min_joint_visible_fraction:
            chosen = (zoom, px, py, fwd)
            break
    if chosen is None:
        record["ops"].append(
            {"op": "pan_zoom", "applied": False, "retries": tries, "reason": "joint_visibility"}
        )
        return
    zoom, px, py, fwd = chosen
    inv = fwd.inverted()

    def warp(channels):
        return kernels.affine_warp(
            np.ascontiguousarray(channels, dtype=np.float32),
            inv.scale, inv.ox, inv.oy, frame, frame,
        )

    out.image = warp(out.image)
    if out.depth is not None:
        out.depth = warp(out.depth[None])[0]
        if out.normals is not None:
            # re-derive instead of interpolating, keeping unit norm intact
            out.normals = normals_from_depth(out.depth)
    elif out.normals is not None:
        warped = warp(out.normals)
        norm = np.sqrt((warped.astype(np.float64) ** 2).sum(axis=0))
        norm[norm == 0] = 1.0
        out.normals = (warped / norm).astype(np.float32)
    if out.masks is not None:
        out.masks = warp(out.masks)
    for skel in out.skeletons:
        skel.joints[:, :2] = fwd.apply(skel.joints[:, :2])
    record["ops"].append(
        {"op": "pan_zoom", "applied": True, "zoom": zoom, "pan": [px, py], "retries": tries}
    )


def _op_brightness(out, config, rng, record):
    d = config.max_channel_delta
    per_channel = rng.random() < config.per_channel_split
    if per_channel:
        a = rng.uniform(1.0 - d, 1.0 + d, size=3)
        b = rng.uniform(-d, d, size=3)
    else:
        a = np.full(3, rng.uniform(1.0 - d, 1.0 + d))
        b = np.full(3, rng.uniform(-d, d))
    out.image = np.clip(out.image * a[:, None, None] + b[:, None, None], 0.0, 1.0).astype(
        np.float32
    )
    record["ops"].append(
        {"op": "brightness", "applied": True, "per_channel": bool(per_channel),
         "gain": a.tolist(), "bias": b.tolist()}
    )


def _op_gauss(out, config, rng, record):
    noise = rng.normal(0.0, config.gauss_sigma, size=out.image.shape)
    out.image = np.clip(out.image + noise, 0.0, 1.0).astype(np.float32)
    record["ops"].append({"op": "gauss_noise", "applied": True, "sigma": config.gauss_sigma})


def _op_burn(out, config, rng, record):
    frame = out.image.shape[-1]
    n = int(rng.integers(1, config.max_burned + 1))
    xs = rng.integers(0, frame, size=n)
    ys = rng.integers(0, frame, size=n)
    vals = (rng.random(n) < 0.5).astype(np.float32)
    for x, y, v in zip(xs, ys, vals):
        out.image[:, y, x] = v
    record["ops"].append(
        {"op": "burn", "applied": True, "count": n,
         "pixels": [[int(x), int(y), float(v)] for x, y, v in zip(xs, ys, vals)]}
    )


def _op_noise_replace(out, rng, record):
    out.image = rng.random(out.image.shape).astype(np.float32)
    if out.depth is not None:
        out.depth = np.zeros_like(out.depth)
    if out.normals is not None:
        out.normals = np.zeros_like(out.normals)
    if out.masks is not None:
        out.masks = np.zeros_like(out.masks)
    out.captions = []
    record["ops"].append({"op": "noise_replace", "applied": True})
