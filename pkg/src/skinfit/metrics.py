"""Approximation-quality measures for compressed mesh animations.

All measures compare an original sequence against an approximation of the
same shape and are exactly zero when the two coincide. Everything here is
pure and thread-safe.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .anim import AnimSequence, face_normals

CSV_HEADER = "disper,erms,maxavgdist,normdistort,crp"


class DegenerateSequenceError(ValueError):
    """The original sequence carries no motion, so relative distortion is undefined."""


class NegativeCompressionWarning(UserWarning):
    """The skinning representation is larger than the raw sequence."""


@dataclass
class ErrorReport:
    """The four error measures plus the compression-rate percentage."""

    disper: float
    erms: float
    max_avg_dist: float
    norm_distort: float
    crp: float

    def csv_row(self) -> str:
        values = (self.disper, self.erms, self.max_avg_dist, self.norm_distort, self.crp)
        return ",".join("%.17g" % v for v in values)


def _check_shapes(orig: AnimSequence, approx: AnimSequence) -> None:
    if orig.positions.shape != approx.positions.shape:
        raise ValueError(
            f"sequence shapes differ: original is {orig.frame_count} frames x "
            f"{orig.vertex_count} vertices, approximation is {approx.frame_count} "
            f"frames x {approx.vertex_count} vertices")


def dis_per(orig: AnimSequence, approx: AnimSequence) -> float:
    """Distortion percentage: Frobenius error relative to deviation from the
    per-vertex time-average position."""
    _check_shapes(orig, approx)
    diff = np.linalg.norm(orig.positions - approx.positions)
    avg = orig.positions.mean(axis=0, keepdims=True)
    spread = np.linalg.norm(orig.positions - avg)
    if spread == 0.0:
        raise DegenerateSequenceError(
            "original sequence is fully static; distortion percentage undefined")
    return 100.0 * diff / spread


def erms(orig: AnimSequence, approx: AnimSequence) -> float:
    """Root-mean-square coordinate error, scaled by 100."""
    _check_shapes(orig, approx)
    diff = np.linalg.norm(orig.positions - approx.positions)
    return 100.0 * diff / np.sqrt(orig.positions.size)


def max_avg_dist(orig: AnimSequence, approx: AnimSequence) -> float:
    """Mean over frames of the worst per-vertex Euclidean error."""
    _check_shapes(orig, approx)
    dist = np.linalg.norm(orig.positions - approx.positions, axis=2)  # (P, N)
    return float(dist.max(axis=1).mean())


def norm_distort(orig: AnimSequence, approx: AnimSequence) -> float:
    """Arcsine of the mean cross-product norm between matching face normals."""
    _check_shapes(orig, approx)
    if not np.array_equal(orig.faces, approx.faces):
        raise ValueError("sequences must share the same faces")
    if orig.face_count == 0:
        raise ValueError("sequences have no faces; normal distortion undefined")
    total = 0.0
    for frame in range(orig.frame_count):
        n_orig = face_normals(orig, frame)
        n_approx = face_normals(approx, frame)
        total += np.linalg.norm(np.cross(n_orig, n_approx), axis=1).sum()
    mean = total / (orig.face_count * orig.frame_count)
    if mean > 1.0 + 1e-9:
        raise AssertionError(f"mean cross norm {mean} exceeds 1 with unit normals")
    return float(np.arcsin(min(mean, 1.0)))


def per_vertex_error(orig: AnimSequence, approx: AnimSequence, frame: int) -> np.ndarray:
    """Euclidean distance per vertex at one frame."""
    _check_shapes(orig, approx)
    if not 0 <= frame < orig.frame_count:
        raise IndexError(f"frame {frame} out of range for {orig.frame_count} frames")
    return np.linalg.norm(orig.positions[frame] - approx.positions[frame], axis=1)


def compression_rate(n: int, p: int, b: int) -> float:
    """Compression percentage of the skinning representation over raw positions.

    Stored values: rest pose (3N) + six weights per vertex (6N) + transforms
    (12BP); raw is 3NP.
    """
    if n < 1 or p < 1 or b < 1:
        raise ValueError(f"sizes must be positive, got N={n} P={p} B={b}")
    rate = 100.0 * (1.0 - (9.0 * n + 12.0 * b * p) / (3.0 * n * p))
    if rate < 0.0:
        warnings.warn(
            f"compressed representation larger than raw (rate {rate:.2f}%)",
            NegativeCompressionWarning, stacklevel=2)
    return rate


def evaluate(orig: AnimSequence, approx: AnimSequence,
             bone_count: int | None = None) -> ErrorReport:
    """Full error report; the compression rate is 0 when no bone count applies."""
    crp = 0.0
    if bone_count is not None:
        crp = compression_rate(orig.vertex_count, orig.frame_count, bone_count)
    return ErrorReport(
        disper=dis_per(orig, approx),
        erms=erms(orig, approx),
        max_avg_dist=max_avg_dist(orig, approx),
        norm_distort=norm_distort(orig, approx),
        crp=crp,
    )
