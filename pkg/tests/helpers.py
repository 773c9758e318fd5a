"""Shared fixture builders for the test suite."""

import json

import numpy as np

from ymap.coco import SkeletonAnnotation

# Limb-covered pose template (joints 5..16): shoulders, elbows, wrists,
# hips, knees, ankles. Face joints stay absent because the 12-limb
# connection table cannot attach them to a skeleton.
POSE_TEMPLATE = {
    5: (20.0, 0.0),
    6: (70.0, 0.0),
    7: (5.0, 40.0),
    8: (85.0, 40.0),
    9: (0.0, 80.0),
    10: (90.0, 80.0),
    11: (30.0, 70.0),
    12: (60.0, 70.0),
    13: (25.0, 120.0),
    14: (65.0, 120.0),
    15: (20.0, 165.0),
    16: (70.0, 165.0),
}


def random_people(rng, n_people, frame=256):
    """1..3 non-overlapping people in separate horizontal cells.

    Joint positions are the template scaled and jittered, kept inside the
    frame; returns a list of SkeletonAnnotation in frame coordinates.
    """
    cell_w = frame // n_people
    people = []
    for i in range(n_people):
        scale = rng.uniform(0.45, min(0.75, (cell_w - 30) / 95.0))
        x0 = i * cell_w + 12 + rng.uniform(0, max(cell_w - 95 * scale - 24, 1))
        y0 = 20 + rng.uniform(0, frame - 170 * scale - 40)
        joints = np.zeros((17, 3))
        for j, (tx, ty) in POSE_TEMPLATE.items():
            jx = x0 + tx * scale + rng.uniform(-2.0, 2.0)
            jy = y0 + ty * scale + rng.uniform(-2.0, 2.0)
            joints[j] = (np.clip(jx, 1, frame - 2), np.clip(jy, 1, frame - 2), 2)
        people.append(SkeletonAnnotation(joints))
    return people


def write_embedding_file(path, words, rng, dims=300):
    with open(path, "w") as fh:
        for w in words:
            vec = rng.uniform(-2.0, 2.0, dims)
            fh.write(w + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
    return path


def coco_fixture(tmp_path, name="ann.json"):
    """Two-image COCO-format file with keypoints, polygons and captions."""
    person_kp = [0, 0, 0] * 5 + [
        60, 40, 2, 110, 40, 2,  # shoulders
        50, 80, 2, 120, 80, 2,  # elbows
        45, 120, 2, 125, 120, 1,  # wrists
        70, 110, 2, 100, 110, 2,  # hips
        65, 160, 2, 105, 160, 2,  # knees
        60, 200, 2, 110, 200, 2,  # ankles
    ]
    data = {
        "images": [
            {"id": 1, "height": 240, "width": 320},
            {"id": 2, "height": 256, "width": 256},
        ],
        "annotations": [
            {
                "id": 10,
                "image_id": 1,
                "category_id": 1,
                "keypoints": person_kp,
                "segmentation": [[40.0, 30.0, 140.0, 30.0, 140.0, 210.0, 40.0, 210.0]],
            },
            {
                "id": 11,
                "image_id": 1,
                "category_id": 3,
                "segmentation": [[180.0, 100.0, 300.0, 100.0, 300.0, 200.0, 180.0, 200.0]],
            },
            {"id": 12, "image_id": 1, "caption": "a person next to a car"},
            {"id": 13, "image_id": 2, "caption": "an empty street"},
        ],
        "categories": [
            {"id": 1, "name": "person"},
            {"id": 3, "name": "car"},
        ],
    }
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path
