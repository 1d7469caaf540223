"""Line-oriented text formats for animations, bone labels, and weight tables.

Animation files round-trip exactly: reals are written with 17 significant
digits. All writes go through a temp file and an atomic rename.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .anim import AnimSequence, WeightMap

FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    """Malformed animation/label/weight file."""


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, path):
        self.path = str(path)
        self.lines = Path(path).read_text().splitlines()
        self.index = 0

    def next_tokens(self, expect: int | None = None) -> list[str]:
        while self.index < len(self.lines) and not self.lines[self.index].strip():
            self.index += 1
        if self.index >= len(self.lines):
            raise FormatError(f"{self.path}: unexpected end of file")
        tokens = self.lines[self.index].split()
        self.index += 1
        if expect is not None and len(tokens) != expect:
            raise FormatError(
                f"{self.path}:{self.index}: expected {expect} fields, got {len(tokens)}")
        return tokens

    def fail(self, message: str):
        raise FormatError(f"{self.path}:{self.index}: {message}")


def _floats(reader: _Reader, tokens: list[str]) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        reader.fail(f"bad number in {tokens!r}")


def _ints(reader: _Reader, tokens: list[str]) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        reader.fail(f"bad integer in {tokens!r}")


def write_anim(path, seq: AnimSequence) -> None:
    """Write the `ANIM` text format: rest pose, faces, then per-frame blocks."""
    out = [f"ANIM {seq.vertex_count} {seq.frame_count} {seq.face_count}"]
    for v in seq.rest_pose:
        out.append("v " + " ".join(FLOAT_FMT % c for c in v))
    for f in seq.faces:
        out.append(f"f {f[0]} {f[1]} {f[2]}")
    for p in range(seq.frame_count):
        out.append(f"frame {p}")
        for v in seq.positions[p]:
            out.append(" ".join(FLOAT_FMT % c for c in v))
    atomic_write_text(path, "\n".join(out) + "\n")


def read_anim(path) -> AnimSequence:
    r = _Reader(path)
    header = r.next_tokens(4)
    if header[0] != "ANIM":
        r.fail(f"expected ANIM header, got {header[0]!r}")
    n, p, f = _ints(r, header[1:])
    if n < 1 or p < 1 or f < 0:
        r.fail(f"bad sizes N={n} P={p} faces={f}")
    rest = np.empty((n, 3))
    for i in range(n):
        tokens = r.next_tokens(4)
        if tokens[0] != "v":
            r.fail(f"expected vertex line, got {tokens[0]!r}")
        rest[i] = _floats(r, tokens[1:])
    faces = np.empty((f, 3), dtype=np.int64)
    for i in range(f):
        tokens = r.next_tokens(4)
        if tokens[0] != "f":
            r.fail(f"expected face line, got {tokens[0]!r}")
        faces[i] = _ints(r, tokens[1:])
    positions = np.empty((p, n, 3))
    for frame in range(p):
        tokens = r.next_tokens(2)
        if tokens[0] != "frame" or _ints(r, tokens[1:])[0] != frame:
            r.fail(f"expected 'frame {frame}'")
        for i in range(n):
            positions[frame, i] = _floats(r, r.next_tokens(3))
    try:
        return AnimSequence(positions, faces, rest)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_labels(path, labels: np.ndarray) -> None:
    """Write the `LBLS` format: one 0/1 row of bone-influence flags per vertex."""
    labels = np.asarray(labels, dtype=np.int64)
    out = [f"LBLS {labels.shape[0]} {labels.shape[1]}"]
    for row in labels:
        out.append(" ".join(str(int(x)) for x in row))
    atomic_write_text(path, "\n".join(out) + "\n")


def read_labels(path) -> np.ndarray:
    r = _Reader(path)
    header = r.next_tokens(3)
    if header[0] != "LBLS":
        r.fail(f"expected LBLS header, got {header[0]!r}")
    n, b = _ints(r, header[1:])
    labels = np.empty((n, b), dtype=np.int64)
    for i in range(n):
        labels[i] = _ints(r, r.next_tokens(b))
    if not np.isin(labels, (0, 1)).all():
        raise FormatError(f"{path}: labels must be 0 or 1")
    return labels


def write_weight_pairs(path, weights: WeightMap, bone_count: int) -> None:
    """Write the `WGTS` format: per vertex a count then (bone, weight) pairs."""
    weights.validate_against(bone_count)
    out = [f"WGTS {weights.vertex_count} {bone_count}"]
    for i in range(weights.vertex_count):
        pairs = weights.influences(i)
        fields = [str(len(pairs))]
        for bone, w in pairs:
            fields.append(str(bone))
            fields.append(FLOAT_FMT % w)
        out.append(" ".join(fields))
    atomic_write_text(path, "\n".join(out) + "\n")


def read_weight_pairs(path) -> tuple[WeightMap, int]:
    r = _Reader(path)
    header = r.next_tokens(3)
    if header[0] != "WGTS":
        r.fail(f"expected WGTS header, got {header[0]!r}")
    n, b = _ints(r, header[1:])
    pairs = []
    for _ in range(n):
        tokens = r.next_tokens()
        count = _ints(r, tokens[:1])[0]
        if len(tokens) != 1 + 2 * count:
            r.fail(f"expected {count} pairs, got {(len(tokens) - 1) / 2}")
        entry = []
        for k in range(count):
            bone = _ints(r, tokens[1 + 2 * k:2 + 2 * k])[0]
            weight = _floats(r, tokens[2 + 2 * k:3 + 2 * k])[0]
            entry.append((bone, weight))
        pairs.append(entry)
    try:
        wm = WeightMap.from_pairs(pairs)
        wm.validate_against(b)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return wm, b
