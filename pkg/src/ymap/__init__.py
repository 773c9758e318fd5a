"""Deterministic pipeline pieces for a Y-shaped multi-attribute prediction
network: supervision-target synthesis, pose decoding, depth/normal
refinement, a caption codec, the multi-term loss and HDM metric, seeded
augmentation, and a structural architecture checker."""

__version__ = "0.1.0"

from . import kernels  # noqa: F401  (selects the compute backend at import)
