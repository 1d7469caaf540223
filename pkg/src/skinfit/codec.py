"""Binary container for skinning models.

Layout (all little-endian):

    magic    4s   "SKND"
    version  u16
    bones    u16
    vertices u32
    frames   u32
    rest pose      N x 3 float32
    weight slots   N x 6 x (bone u16, weight float32); unused slots (0xFFFF, 0)
    transforms     P x B x 12 float32, row-major 3x4
    faces          F x 3 u32

The face count is recovered from the remaining byte length. Weights are
stored as float32; decoding renormalizes each vertex to sum exactly to 1.
Encoding canonicalizes the quantized weights so that encode-decode-encode is
byte-identical.
"""
from __future__ import annotations

import struct

import numpy as np

from . import metrics
from .anim import MAX_INFLUENCES, NO_BONE, AnimSequence, BoneTransformSet, SkinningModel, WeightMap

MAGIC = b"SKND"
VERSION = 1
MAX_BONES = 0xFFFE
_EMPTY_SLOT = 0xFFFF
_HEADER = struct.Struct("<4sHHII")
_SLOT_DTYPE = np.dtype([("bone", "<u2"), ("weight", "<f4")])


class CodecError(ValueError):
    """Malformed or inconsistent compressed-animation data."""


def _canonical_quantized(row: np.ndarray) -> np.ndarray:
    """Quantize a convex weight row to float32 so that renormalize-then-quantize
    is a fixed point; keeps repeated encode/decode cycles byte-stable."""
    q = (row / row.sum()).astype(np.float32)
    for _ in range(8):
        d = q.astype(np.float64)
        r = (d / d.sum()).astype(np.float32)
        if np.array_equal(r, q):
            break
        q = r
    return q


def encode(model: SkinningModel) -> bytes:
    if model.bone_count > MAX_BONES:
        raise CodecError(f"{model.bone_count} bones exceed the 16-bit id limit ({MAX_BONES})")
    n = model.vertex_count
    p = model.frame_count

    slots = np.zeros((n, MAX_INFLUENCES), dtype=_SLOT_DTYPE)
    slots["bone"] = _EMPTY_SLOT
    ids = model.weights.bone_ids
    w = model.weights.weights
    for i in range(n):
        used = np.flatnonzero(ids[i] != NO_BONE)
        if used.size > MAX_INFLUENCES:
            raise CodecError(f"vertex {i} has {used.size} influences")
        slots["bone"][i, :used.size] = ids[i, used]
        slots["weight"][i, :used.size] = _canonical_quantized(w[i, used])

    parts = [
        _HEADER.pack(MAGIC, VERSION, model.bone_count, n, p),
        model.rest_pose.astype("<f4").tobytes(),
        slots.tobytes(),
        model.transforms.transforms.astype("<f4").tobytes(),
        model.faces.astype("<u4").tobytes(),
    ]
    return b"".join(parts)


def decode(data: bytes) -> SkinningModel:
    if len(data) < _HEADER.size:
        raise CodecError(f"truncated stream: {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, bones, vertices, frames = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CodecError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CodecError(f"unsupported version {version}, expected {VERSION}")
    if bones < 1 or vertices < 1 or frames < 1:
        raise CodecError(f"bad header sizes B={bones} N={vertices} P={frames}")

    rest_bytes = 12 * vertices
    slot_bytes = _SLOT_DTYPE.itemsize * MAX_INFLUENCES * vertices
    transform_bytes = 48 * bones * frames
    fixed = _HEADER.size + rest_bytes + slot_bytes + transform_bytes
    if len(data) < fixed:
        raise CodecError(f"truncated stream: {len(data)} bytes, fixed blocks need {fixed}")
    face_bytes = len(data) - fixed
    if face_bytes % 12 != 0:
        raise CodecError(f"face block of {face_bytes} bytes is not a whole number of triangles")

    offset = _HEADER.size
    rest = np.frombuffer(data, dtype="<f4", count=3 * vertices, offset=offset)
    rest = rest.astype(np.float64).reshape(vertices, 3)
    offset += rest_bytes
    slots = np.frombuffer(data, dtype=_SLOT_DTYPE, count=MAX_INFLUENCES * vertices,
                          offset=offset).reshape(vertices, MAX_INFLUENCES)
    offset += slot_bytes
    transforms = np.frombuffer(data, dtype="<f4", count=12 * bones * frames, offset=offset)
    transforms = transforms.astype(np.float64).reshape(frames, bones, 3, 4)
    offset += transform_bytes
    faces = np.frombuffer(data, dtype="<u4", count=face_bytes // 4, offset=offset)
    faces = faces.astype(np.int64).reshape(-1, 3)

    used = slots["bone"] != _EMPTY_SLOT
    ids = np.where(used, slots["bone"].astype(np.int64), NO_BONE)
    weights = np.where(used, slots["weight"].astype(np.float64), 0.0)
    if not used.any(axis=1).all():
        raise CodecError("a vertex has no weight slots")
    if (ids[used] >= bones).any():
        raise CodecError(f"weight slot references a bone >= {bones}")
    sums = weights.sum(axis=1)
    if (sums <= 0.0).any() or (weights < 0.0).any():
        raise CodecError("decoded weights must be positive per vertex")
    weights = weights / sums[:, None]

    try:
        return SkinningModel(
            rest_pose=rest,
            weights=WeightMap(ids, weights),
            transforms=BoneTransformSet(transforms),
            faces=faces,
        )
    except ValueError as exc:
        raise CodecError(f"decoded model violates invariants: {exc}") from exc


def report_sizes(model: SkinningModel, seq: AnimSequence) -> tuple[int, int, float]:
    """Raw and compressed value counts plus the compression-rate percentage."""
    if model.vertex_count != seq.vertex_count or model.frame_count != seq.frame_count:
        raise ValueError(
            f"model covers {model.frame_count}x{model.vertex_count}, sequence is "
            f"{seq.frame_count}x{seq.vertex_count}")
    n, p, b = seq.vertex_count, seq.frame_count, model.bone_count
    raw = 3 * n * p
    compressed = 9 * n + 12 * b * p
    return raw, compressed, metrics.compression_rate(n, p, b)
