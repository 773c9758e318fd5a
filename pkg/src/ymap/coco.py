"""COCO-2017 annotation ingest: parsing, mask rasterization, the category
grouping table, and letterboxing into the 256x256 working frame.

Teacher files (pre-generated, per image id) follow this directory layout
under a root directory:

    depth/<image_id>.png     16-bit grayscale depth
    text/<image_id>.png      binary text-region mask (any PNG; nonzero = text)
    groups/<image_id>_<g>.png  optional per-group binary masks, g in 0..10
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .grids import ScaleOffset, read_depth16

FRAME = 256
NUM_JOINTS = 17

GROUP_NAMES = (
    "Persons",
    "Vehicles",
    "Animals",
    "Objects",
    "Furniture",
    "Appliances",
    "Materials",
    "Obstacles",
    "Building",
    "Nature",
    "Text",
)
NUM_GROUPS = len(GROUP_NAMES)

# COCO keypoint order: nose, eyes, ears, shoulders, elbows, wrists, hips,
# knees, ankles. Visibility: 0 absent, 1 occluded, 2 visible.
JOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)


@dataclass
class SkeletonAnnotation:
    """One annotated person: (17, 3) array of x, y, visibility."""

    joints: np.ndarray

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.shape != (NUM_JOINTS, 3):
            raise ValueError(f"expected (17, 3) joints, got {self.joints.shape}")

    def annotated_mask(self):
        return self.joints[:, 2] > 0


@dataclass
class SegShape:
    """One segmentation instance: either a polygon or an uncompressed RLE."""

    category_id: int
    polygon: np.ndarray | None = None  # (N, 2) x, y vertices
    rle_counts: list[int] | None = None


@dataclass
class AnnotationRecord:
    image_id: int
    height: int
    width: int
    skeletons: list[SkeletonAnnotation] = field(default_factory=list)
    shapes: list[SegShape] = field(default_factory=list)
    captions: list[str] = field(default_factory=list)

    @property
    def has_persons(self):
        return len(self.skeletons) > 0


class ClassGroupTable:
    """Total mapping from COCO category id to one of the 11 group indices."""

    def __init__(self, id_to_group, names=None):
        self.id_to_group = dict(id_to_group)
        self.names = dict(names or {})

    def __contains__(self, category_id):
        return category_id in self.id_to_group

    def __len__(self):
        return len(self.id_to_group)

    def group_of(self, category_id):
        try:
            return self.id_to_group[category_id]
        except KeyError:
            raise KeyError(f"unknown COCO category id: {category_id}") from None

    @classmethod
    def from_file(cls, path):
        id_to_group = {}
        names = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'id<TAB>name<TAB>group'")
            cid = int(parts[0])
            if cid in id_to_group:
                raise ValueError(f"{path}:{lineno}: duplicate category id {cid}")
            group = parts[2]
            if group not in GROUP_NAMES:
                raise ValueError(f"{path}:{lineno}: unknown group {group!r}")
            id_to_group[cid] = GROUP_NAMES.index(group)
            names[cid] = parts[1]
        return cls(id_to_group, names)


_DEFAULT_TABLE = None


def default_class_groups():
    """The table shipped with the package (data/class_groups.txt)."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        ref = resources.files("ymap").joinpath("data/class_groups.txt")
        with resources.as_file(ref) as path:
            _DEFAULT_TABLE = ClassGroupTable.from_file(path)
    return _DEFAULT_TABLE


def assign_class_group(category_id, table=None):
    """Group index 0..10 for a category id; raises KeyError when unknown."""
    table = table or default_class_groups()
    return table.group_of(category_id)


def parse_annotations(*paths, table=None):
    """Parse one or more COCO-format annotation files into records.

    Accepts person-keypoints, instances and captions files in any mix; the
    contents are merged by image id. Images without annotations are kept
    (they matter for the person-free noise-replacement augmentation).
    Returns records sorted by image id.
    """
    table = table or default_class_groups()
    records: dict[int, AnnotationRecord] = {}
    for path in paths:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON: {exc}") from exc
        if not isinstance(data, dict) or "images" not in data:
            raise ValueError(f"{path}: not a COCO annotation file (no 'images' key)")
        for img in data["images"]:
            rid = img["id"]
            if rid not in records:
                records[rid] = AnnotationRecord(
                    image_id=rid, height=img["height"], width=img["width"]
                )
        for ann in data.get("annotations", []):
            rec = records.get(ann["image_id"])
            if rec is None:
                raise ValueError(f"{path}: annotation references unknown image {ann['image_id']}")
            if "caption" in ann:
                rec.captions.append(ann["caption"])
                continue
            if "keypoints" in ann:
                kp = ann["keypoints"]
                if len(kp) != NUM_JOINTS * 3:
                    raise ValueError(
                        f"{path}: expected {NUM_JOINTS * 3} keypoint values, got {len(kp)}"
                    )
                joints = np.asarray(kp, dtype=np.float64).reshape(NUM_JOINTS, 3)
                joints[:, 0] = np.clip(joints[:, 0], 0, rec.width - 1)
                joints[:, 1] = np.clip(joints[:, 1], 0, rec.height - 1)
                rec.skeletons.append(SkeletonAnnotation(joints))
            if "segmentation" in ann and "category_id" in ann:
                cid = ann["category_id"]
                if cid not in table:
                    raise ValueError(f"{path}: unknown category id {cid}")
                rec.shapes.extend(_parse_segmentation(ann["segmentation"], cid, rec))
    return [records[k] for k in sorted(records)]


def _parse_segmentation(seg, category_id, rec):
    shapes = []
    if isinstance(seg, dict):  # uncompressed RLE
        shapes.append(SegShape(category_id, rle_counts=list(seg["counts"])))
    else:
        for poly in seg:
            pts = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
            pts[:, 0] = np.clip(pts[:, 0], 0, rec.width)
            pts[:, 1] = np.clip(pts[:, 1], 0, rec.height)
            shapes.append(SegShape(category_id, polygon=pts))
    return shapes


def rasterize_mask(shape, height, width):
    """Binary float32 mask for one SegShape.

    Polygons are filled with the even-odd rule (pixel-center sampling);
    RLE is decoded column-major, runs alternating background/foreground.
    """
    out = np.zeros((height, width), dtype=np.float32)
    if shape.polygon is not None:
        poly = np.asarray(shape.polygon, dtype=np.float64)
        if poly.shape[0] < 3:
            raise ValueError(f"degenerate polygon with {poly.shape[0]} vertices")
        kernels.fill_polygon_evenodd(
            np.ascontiguousarray(poly[:, 0]), np.ascontiguousarray(poly[:, 1]), out
        )
        return out
    counts = shape.rle_counts or []
    if sum(counts) != height * width:
        raise ValueError(
            f"RLE counts sum to {sum(counts)}, expected {height}x{width}={height * width}"
        )
    flat = np.zeros(height * width, dtype=np.float32)
    pos = 0
    value = 0.0
    for run in counts:
        if value:
            flat[pos : pos + run] = 1.0
        pos += run
        value = 1.0 - value
    return flat.reshape((width, height)).T.copy()  # column-major per COCO


def letterbox_transform(height, width, target=FRAME):
    """Aspect-preserving transform from (height, width) into target x target."""
    s = min(target / width, target / height)
    new_w = round(width * s)
    new_h = round(height * s)
    return ScaleOffset(s, (target - new_w) / 2.0, (target - new_h) / 2.0)


def letterbox(image, target=FRAME):
    """Resize with preserved aspect ratio and centered black padding.

    `image` is planar (C, H, W) or single-channel (H, W). Returns the
    letterboxed grid and the forward ScaleOffset mapping input coordinates
    to output coordinates (apply it to annotations).
    """
    arr = np.asarray(image)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None]
    c, h, w = arr.shape
    fwd = letterbox_transform(h, w, target)
    if fwd.is_identity and h == target and w == target:
        out = arr.astype(np.float32, copy=True)
    else:
        inv = fwd.inverted()
        out = kernels.affine_warp(
            np.ascontiguousarray(arr, dtype=np.float32), inv.scale, inv.ox, inv.oy, target, target
        )
    return (out[0] if squeeze else out), fwd


def load_teacher_maps(root, image_id):
    """Read whatever teacher files exist for an image id; missing -> None.

    Returns dict with keys 'depth' (H, W in [0, 1]), 'text' (H, W binary)
    and 'groups' (dict group index -> binary mask).
    """
    root = Path(root)
    out = {"depth": None, "text": None, "groups": {}}
    depth_path = root / "depth" / f"{image_id}.png"
    if depth_path.exists():
        out["depth"] = read_depth16(depth_path)
    text_path = root / "text" / f"{image_id}.png"
    if text_path.exists():
        arr = np.asarray(Image.open(text_path).convert("L"))
        out["text"] = (arr > 0).astype(np.float32)
    for g in range(NUM_GROUPS):
        gpath = root / "groups" / f"{image_id}_{g}.png"
        if gpath.exists():
            arr = np.asarray(Image.open(gpath).convert("L"))
            out["groups"][g] = (arr > 0).astype(np.float32)
    return out
