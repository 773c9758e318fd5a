"""Synthesis of the 44-channel supervision stack plus the 8x300 token block.

Channel layout (256x256 each):
    0-16   joint heatmaps        (COCO joint order)
    17-28  limb occupancy bands  (see LIMB_TABLE)
    29     depth
    30-32  surface normals nx, ny, nz
    33     text mask
    34-43  group masks Persons..Nature (Text lives on channel 33)
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .coco import FRAME, NUM_GROUPS, NUM_JOINTS, letterbox_transform
from .grids import read_tensor, write_tensor

JOINT_CHANNELS = slice(0, 17)
PAF_CHANNELS = slice(17, 29)
DEPTH_CHANNEL = 29
NORMAL_CHANNELS = slice(30, 33)
TEXT_CHANNEL = 33
GROUP_CHANNELS = slice(34, 44)
NUM_CHANNELS = 44
TOKEN_SLOTS = 8
TOKEN_DIMS = 300

# Limb connection table: 12 joint pairs, in PAF channel order. Shoulders to
# elbows, elbows to wrists, hips to knees, knees to ankles, shoulders to
# hips, shoulder to shoulder, hip to hip.
LIMB_TABLE = (
    (5, 7),
    (7, 9),
    (6, 8),
    (8, 10),
    (11, 13),
    (13, 15),
    (12, 14),
    (14, 16),
    (5, 11),
    (6, 12),
    (5, 6),
    (11, 12),
)
NUM_LIMBS = len(LIMB_TABLE)


@dataclass(frozen=True)
class DecaySchedule:
    """Window size shrinking by `step` px every `epochs_per_step` epochs."""

    start_size: int
    end_size: int
    epochs_per_step: int = 20
    step: int = 1

    def at_epoch(self, epoch):
        if epoch < 0:
            raise ValueError("epoch must be >= 0")
        return max(self.end_size, self.start_size - self.step * (epoch // self.epochs_per_step))


JOINT_SIZE_SCHEDULE = DecaySchedule(start_size=23, end_size=6)
PAF_WIDTH_SCHEDULE = DecaySchedule(start_size=6, end_size=2)


def decay_at_epoch(schedule, epoch):
    return schedule.at_epoch(epoch)


def synth_joint_heatmaps(skeletons, epoch=0, frame=FRAME, schedule=JOINT_SIZE_SCHEDULE, report=None):
    """17 joint heatmaps: one Gaussian blob per visible joint.

    Blob support is a size x size window (size from the schedule), sigma is
    size/4, the peak is exactly 1.0 at integer joint positions, and people
    combine by per-pixel max. Joints outside the frame are skipped and
    counted in report['joints_skipped'] when a report dict is given.
    """
    size = schedule.at_epoch(epoch)
    sigma = size / 4.0
    maps = np.zeros((NUM_JOINTS, frame, frame), dtype=np.float32)
    skipped = 0
    for skel in skeletons:
        for j in range(NUM_JOINTS):
            x, y, vis = skel.joints[j]
            if vis <= 0:
                continue
            if not (0 <= x < frame and 0 <= y < frame):
                skipped += 1
                continue
            kernels.splat_gaussian_max(maps[j], float(x), float(y), size, sigma)
    if report is not None:
        report["joints_skipped"] = report.get("joints_skipped", 0) + skipped
    return maps


def synth_pafs(skeletons, epoch=0, frame=FRAME, schedule=PAF_WIDTH_SCHEDULE, limb_table=LIMB_TABLE):
    """12 limb channels: 1.0 on the band of width(epoch) px along each limb
    whose two joints are both annotated; overlaps combine by max."""
    width = schedule.at_epoch(epoch)
    maps = np.zeros((len(limb_table), frame, frame), dtype=np.float32)
    for skel in skeletons:
        for c, (a, b) in enumerate(limb_table):
            xa, ya, va = skel.joints[a]
            xb, yb, vb = skel.joints[b]
            if va <= 0 or vb <= 0:
                continue
            kernels.splat_band_max(
                maps[c], float(xa), float(ya), float(xb), float(yb), float(width)
            )
    return maps


def synth_group_masks(record, table, transform=None, frame=FRAME):
    """11 channels in stack order (text first, then Persons..Nature).

    Instance shapes are mapped through the letterbox transform, rasterized
    at frame resolution, and unioned per group by per-pixel max.
    """
    from .coco import rasterize_mask  # local import avoids a cycle at module load

    if transform is None:
        transform = letterbox_transform(record.height, record.width, frame)
    out = np.zeros((NUM_GROUPS, frame, frame), dtype=np.float32)
    for shape in record.shapes:
        group = table.group_of(shape.category_id)
        channel = 0 if group == NUM_GROUPS - 1 else group + 1  # Text -> 0
        if shape.polygon is not None:
            mapped = type(shape)(shape.category_id, polygon=transform.apply(shape.polygon))
            mask = rasterize_mask(mapped, frame, frame)
        else:
            native = rasterize_mask(shape, record.height, record.width)
            inv = transform.inverted()
            mask = kernels.affine_warp(native[None], inv.scale, inv.ox, inv.oy, frame, frame)[0]
            mask = (mask >= 0.5).astype(np.float32)
        np.maximum(out[channel], mask, out=out[channel])
    return out


@dataclass
class TargetStack:
    """The full supervision target for one sample."""

    channels: np.ndarray  # (44, 256, 256) float32
    tokens: np.ndarray  # (8, 300) float32

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float32)
        self.tokens = np.asarray(self.tokens, dtype=np.float32)
        if self.channels.shape != (NUM_CHANNELS, FRAME, FRAME):
            raise ValueError(f"expected ({NUM_CHANNELS}, {FRAME}, {FRAME}) channels, got {self.channels.shape}")
        if self.tokens.shape != (TOKEN_SLOTS, TOKEN_DIMS):
            raise ValueError(f"expected ({TOKEN_SLOTS}, {TOKEN_DIMS}) tokens, got {self.tokens.shape}")

    @property
    def joints(self):
        return self.channels[JOINT_CHANNELS]

    @property
    def pafs(self):
        return self.channels[PAF_CHANNELS]

    @property
    def depth(self):
        return self.channels[DEPTH_CHANNEL]

    @property
    def normals(self):
        return self.channels[NORMAL_CHANNELS]

    @property
    def text(self):
        return self.channels[TEXT_CHANNEL]

    @property
    def groups(self):
        return self.channels[GROUP_CHANNELS]


def assemble_targets(joint_maps, paf_maps, depth, normals, group_maps, tokens=None):
    """Place the synthesized parts into their stack channels.

    `group_maps` is the 11-channel output of synth_group_masks (text first).
    Missing tokens default to zeros.
    """
    channels = np.zeros((NUM_CHANNELS, FRAME, FRAME), dtype=np.float32)
    channels[JOINT_CHANNELS] = _checked(joint_maps, 17, "joint heatmaps")
    channels[PAF_CHANNELS] = _checked(paf_maps, 12, "limb bands")
    channels[DEPTH_CHANNEL] = _checked(depth[None] if depth.ndim == 2 else depth, 1, "depth")[0]
    channels[NORMAL_CHANNELS] = _checked(normals, 3, "normals")
    gm = _checked(group_maps, NUM_GROUPS, "group masks")
    channels[TEXT_CHANNEL] = gm[0]
    channels[GROUP_CHANNELS] = gm[1:]
    if tokens is None:
        tokens = np.zeros((TOKEN_SLOTS, TOKEN_DIMS), dtype=np.float32)
    return TargetStack(channels, tokens)


def _checked(arr, n_channels, what):
    arr = np.asarray(arr, dtype=np.float32)
    if arr.shape != (n_channels, FRAME, FRAME):
        raise ValueError(f"{what}: expected ({n_channels}, {FRAME}, {FRAME}), got {arr.shape}")
    return arr


def save_stack(stack, path):
    """Persist a stack as two tensor files: <path> and <stem>.tokens<ext>."""
    write_tensor(path, stack.channels, value_range=(-1.0, 1.0))
    write_tensor(_tokens_path(path), stack.tokens, value_range=(-1.0, 1.0))


def load_stack(path):
    channels, _ = read_tensor(path)
    tokens, _ = read_tensor(_tokens_path(path))
    return TargetStack(channels, tokens)


def _tokens_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".tokens" + path.suffix)
