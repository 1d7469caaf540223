"""Turn per-bone influence probabilities into sparse convex weights.

Keeps the six strongest predictions per vertex, prunes numerically
meaningless ones, renormalizes, and derives the active bone count from the
bones that survive anywhere.
"""
from __future__ import annotations

import numpy as np

from .anim import MAX_INFLUENCES, NO_BONE, WeightMap


def extract_weights(probabilities: np.ndarray,
                    epsilon: float = 1e-3) -> tuple[WeightMap, int]:
    """Top-6 weight extraction with pruning and dense bone reindexing.

    probabilities : (N, b_max) values in [0, 1]
    epsilon       : per vertex, drop kept entries below epsilon * strongest

    A bone is active if any vertex retains it; active bones are renumbered
    densely in ascending original order. Ties in strength break toward the
    lower bone index. Returns the weight map and the active bone count.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError(f"probabilities must be (vertices, b_max), got shape {probs.shape}")
    if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")

    n = probs.shape[0]
    width = min(MAX_INFLUENCES, probs.shape[1])
    order = np.argsort(-probs, axis=1, kind="stable")[:, :width]
    top = np.take_along_axis(probs, order, axis=1)
    strongest = top[:, 0]
    if (strongest <= 0.0).any():
        dead = np.flatnonzero(strongest <= 0.0)
        raise ValueError(
            f"vertices {dead.tolist()[:8]} have all-zero probabilities; cannot assign bones")
    keep = (top > 0.0) & (top >= epsilon * strongest[:, None])
    kept = np.where(keep, top, 0.0)
    weights = kept / kept.sum(axis=1, keepdims=True)
    bone_ids = np.where(keep, order, NO_BONE)

    active = np.unique(bone_ids[bone_ids != NO_BONE])
    remap = np.full(probs.shape[1], NO_BONE, dtype=np.int64)
    remap[active] = np.arange(active.size)

    # compact kept slots to the left, in descending-probability order
    out_ids = np.full((n, width), NO_BONE, dtype=np.int64)
    out_w = np.zeros((n, width))
    for i in range(n):
        slots = np.flatnonzero(keep[i])
        out_ids[i, :slots.size] = remap[bone_ids[i, slots]]
        out_w[i, :slots.size] = weights[i, slots]
    return WeightMap(out_ids, out_w), int(active.size)
