"""Training objective and evaluation metrics.

The objective is a gain-weighted sum of per-term mean squared errors over
the token block and six channel blocks of the target stack. HDM reports the
fraction of pixels whose prediction lands within an absolute threshold of
the target on [0, 1]-normalized maps.
"""

from dataclasses import dataclass, field

import numpy as np

from .targets import (
    DEPTH_CHANNEL,
    GROUP_CHANNELS,
    JOINT_CHANNELS,
    NORMAL_CHANNELS,
    PAF_CHANNELS,
    TEXT_CHANNEL,
)

DEFAULT_GAINS = {
    "tokens": 10.0,
    "joints": 2.4,
    "pafs": 0.8,
    "depth": 1.0,
    "normals": 1.0,
    "text": 1.0,
    "groups": 3.0,
}

TERM_ORDER = ("tokens", "joints", "pafs", "depth", "normals", "text", "groups")


@dataclass
class LossConfig:
    weight: float = 1.0
    gains: dict = field(default_factory=lambda: dict(DEFAULT_GAINS))

    def __post_init__(self):
        missing = set(TERM_ORDER) - set(self.gains)
        if missing:
            raise ValueError(f"missing gains for terms: {sorted(missing)}")
        if any(g <= 0 for g in self.gains.values()):
            raise ValueError("gains must be positive")


def _term_blocks(stack):
    return {
        "tokens": stack.tokens,
        "joints": stack.channels[JOINT_CHANNELS],
        "pafs": stack.channels[PAF_CHANNELS],
        "depth": stack.channels[DEPTH_CHANNEL],
        "normals": stack.channels[NORMAL_CHANNELS],
        "text": stack.channels[TEXT_CHANNEL],
        "groups": stack.channels[GROUP_CHANNELS],
    }


def multiterm_loss(pred, truth, config=None):
    """Total loss and the per-term MSE breakdown.

    Each term is the mean squared error over every element of its block;
    total = weight * sum(gain_i * mse_i). Returns (total, {term: mse}).
    """
    config = config or LossConfig()
    pred_blocks = _term_blocks(pred)
    truth_blocks = _term_blocks(truth)
    per_term = {}
    total = 0.0
    for term in TERM_ORDER:
        p = np.asarray(pred_blocks[term], dtype=np.float64)
        t = np.asarray(truth_blocks[term], dtype=np.float64)
        if p.shape != t.shape:
            raise ValueError(f"{term}: shape mismatch {p.shape} vs {t.shape}")
        if not (np.isfinite(p).all() and np.isfinite(t).all()):
            raise ValueError(f"{term}: non-finite values")
        mse = float(np.mean((t - p) ** 2))
        per_term[term] = mse
        total += config.gains[term] * mse
    return config.weight * total, per_term


def hdm(pred, truth, threshold):
    """Fraction of pixels with |truth - pred| <= threshold."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    return float(np.count_nonzero(np.abs(t - p) <= threshold)) / p.size


def token_cosine(pred, truth, tiny=1e-9):
    """Per-slot cosine similarity; slots with a near-zero vector report 0."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    out = np.zeros(p.shape[0], dtype=np.float64)
    for i in range(p.shape[0]):
        np_, nt = np.linalg.norm(p[i]), np.linalg.norm(t[i])
        if np_ < tiny or nt < tiny:
            continue
        out[i] = float(p[i] @ t[i] / (np_ * nt))
    return out
