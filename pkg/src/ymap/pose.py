"""Decode joint heatmaps and limb bands into assembled per-person skeletons.

The decoder is deterministic: candidate limbs are matched greedily in
descending score with ties broken by lower joint indices, then lower x,
then lower y; connected components over the accepted limbs become people.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .targets import LIMB_TABLE, NUM_JOINTS

PEAK_THRESHOLD = 0.3
LIMB_THRESHOLD = 0.25
LIMB_SAMPLES = 10


@dataclass(frozen=True)
class Keypoint:
    joint: int
    x: float
    y: float
    score: float


@dataclass
class Skeleton:
    keypoints: dict = field(default_factory=dict)  # joint index -> Keypoint
    score: float = 0.0

    def joint_array(self):
        """(17, 3) array of x, y, score; absent joints are zero rows."""
        out = np.zeros((NUM_JOINTS, 3), dtype=np.float64)
        for j, kp in self.keypoints.items():
            out[j] = (kp.x, kp.y, kp.score)
        return out


def extract_peaks(heatmap, threshold=PEAK_THRESHOLD, joint=0):
    """Local maxima above threshold with sub-pixel quadratic refinement,
    sorted by descending score."""
    heat = np.asarray(heatmap, dtype=np.float64)
    ys, xs = kernels.find_peaks(heat, float(threshold))
    peaks = []
    h, w = heat.shape
    for y, x in zip(ys, xs):
        score = heat[y, x]
        # refine only with both neighbors present; border peaks keep the
        # integer position instead of a faked half-pixel shift
        fx = float(x)
        if 0 < x < w - 1:
            fx += _quadratic_offset(heat[y, x - 1], score, heat[y, x + 1])
        fy = float(y)
        if 0 < y < h - 1:
            fy += _quadratic_offset(heat[y - 1, x], score, heat[y + 1, x])
        peaks.append(Keypoint(joint, fx, fy, float(score)))
    peaks.sort(key=lambda p: (-p.score, p.x, p.y))
    return peaks


def _quadratic_offset(fm, f0, fp):
    denom = fm - 2.0 * f0 + fp
    if abs(denom) < 1e-12:
        return 0.0
    return float(np.clip(0.5 * (fm - fp) / denom, -0.5, 0.5))


def score_limb(paf, a, b, samples=LIMB_SAMPLES):
    """Mean PAF value bilinearly sampled at evenly spaced points on a->b."""
    return kernels.line_mean_bilinear(
        np.asarray(paf, dtype=np.float64), a.x, a.y, b.x, b.y, int(samples)
    )


def assemble_skeletons(
    peaks_per_joint,
    pafs,
    limb_table=LIMB_TABLE,
    limb_threshold=LIMB_THRESHOLD,
    samples=LIMB_SAMPLES,
):
    """Greedy limb matching, then connected components over accepted limbs.

    `peaks_per_joint` is a list of 17 Keypoint lists, `pafs` the matching
    (12, H, W) band channels.
    """
    pafs = np.asarray(pafs, dtype=np.float64)
    accepted = []  # (score, joint_a, idx_a, joint_b, idx_b)
    for c, (ja, jb) in enumerate(limb_table):
        cands = []
        for ia, a in enumerate(peaks_per_joint[ja]):
            for ib, b in enumerate(peaks_per_joint[jb]):
                s = score_limb(pafs[c], a, b, samples)
                if s >= limb_threshold:
                    cands.append((s, ia, ib, a, b))
        cands.sort(key=lambda t: (-t[0], t[3].x, t[3].y, t[4].x, t[4].y))
        used_a, used_b = set(), set()
        for s, ia, ib, _, _ in cands:
            if ia in used_a or ib in used_b:
                continue
            used_a.add(ia)
            used_b.add(ib)
            accepted.append((s, ja, ia, jb, ib))

    # union-find over (joint, peak index) endpoints
    parent = {}

    def find(k):
        parent.setdefault(k, k)
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[min(ra, rb)] = max(ra, rb)

    for s, ja, ia, jb, ib in accepted:
        union((ja, ia), (jb, ib))

    groups = {}
    limb_score_sum = {}
    for s, ja, ia, jb, ib in accepted:
        root = find((ja, ia))
        groups.setdefault(root, set()).update([(ja, ia), (jb, ib)])
        limb_score_sum[root] = limb_score_sum.get(root, 0.0) + s

    skeletons = []
    for root, members in groups.items():
        kps = {}
        for j, i in sorted(members):
            if j not in kps:  # each joint index at most once per skeleton
                kps[j] = peaks_per_joint[j][i]
        total = limb_score_sum[root] + sum(kp.score for kp in kps.values())
        skeletons.append(Skeleton(keypoints=kps, score=total))
    skeletons.sort(
        key=lambda s: (
            -s.score,
            min(s.keypoints),
            min((kp.x, kp.y) for kp in s.keypoints.values()),
        )
    )
    return skeletons


def decode_stack(joint_maps, paf_maps, peak_threshold=PEAK_THRESHOLD, **kwargs):
    """Convenience: peaks for all 17 channels, then skeleton assembly."""
    peaks = [
        extract_peaks(joint_maps[j], peak_threshold, joint=j) for j in range(NUM_JOINTS)
    ]
    return assemble_skeletons(peaks, paf_maps, **kwargs)


def skeletons_to_json(skeletons):
    """JSON-ready structure: list of {score, joints: 17 x ([x, y, score] | null)}."""
    out = []
    for s in skeletons:
        joints = [None] * NUM_JOINTS
        for j, kp in s.keypoints.items():
            joints[j] = [kp.x, kp.y, kp.score]
        out.append({"score": s.score, "joints": joints})
    return out
