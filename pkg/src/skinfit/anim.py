"""Mesh-animation data model: sequences, skinning weights, bone transforms.

Conventions
-----------
Points are float64 arrays of shape (3,). A sequence stores per-frame vertex
positions as a (frames, vertices, 3) array. A bone transform is an affine 3x4
matrix acting on homogeneous rest-pose coordinates [x, y, z, 1]. Container
types copy their inputs and mark the copies read-only, so instances are
immutable and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_INFLUENCES = 6
NO_BONE = -1


class DegenerateFaceError(ValueError):
    """Zero-area faces whose normals are undefined."""

    def __init__(self, frame: int, face_ids):
        self.frame = frame
        self.face_ids = [int(f) for f in face_ids]
        super().__init__(
            f"zero-area faces {self.face_ids} at frame {frame}: normal undefined"
        )


def _frozen(values, dtype) -> np.ndarray:
    # np.array always copies, so freezing never touches the caller's array.
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass
class AnimSequence:
    """A mesh animation: per-frame vertex positions, topology, and a rest pose.

    positions : (P, N, 3) float64
    faces     : (F, 3) int64, counterclockwise winding, may be empty
    rest_pose : (N, 3) float64
    """

    positions: np.ndarray
    faces: np.ndarray
    rest_pose: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        rest = np.array(self.rest_pose, dtype=np.float64)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise ValueError(f"positions must be (frames, vertices, 3), got {pos.shape}")
        p, n = pos.shape[0], pos.shape[1]
        if p < 1 or n < 1:
            raise ValueError("need at least one frame and one vertex")
        if rest.shape != (n, 3):
            raise ValueError(f"rest pose must be ({n}, 3), got {rest.shape}")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(rest)):
            raise ValueError("positions and rest pose must be finite")
        if faces.size and (faces.min() < 0 or faces.max() >= n):
            raise ValueError(f"face indices must lie in [0, {n})")
        self.positions = _frozen(pos, np.float64)
        self.faces = _frozen(faces, np.int64)
        self.rest_pose = _frozen(rest, np.float64)

    @classmethod
    def from_positions(cls, positions, faces, rest_pose=None) -> "AnimSequence":
        """Build a sequence; defaults the rest pose to frame 0."""
        positions = np.asarray(positions, dtype=np.float64)
        if rest_pose is None:
            rest_pose = positions[0]
        return cls(positions, faces, rest_pose)

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[1]

    @property
    def frame_count(self) -> int:
        return self.positions.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]

    def bounding_box_diagonal(self) -> float:
        """Diagonal of the axis-aligned box enclosing every frame."""
        lo = self.positions.min(axis=(0, 1))
        hi = self.positions.max(axis=(0, 1))
        return float(np.linalg.norm(hi - lo))


@dataclass
class WeightMap:
    """Sparse convex vertex-to-bone weights, at most MAX_INFLUENCES per vertex.

    bone_ids : (N, S) int64, S <= 6; unused slots hold NO_BONE after real ones
    weights  : (N, S) float64, zero in unused slots, rows sum to 1 within 1e-9
    """

    bone_ids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ids = np.array(self.bone_ids, dtype=np.int64)
        w = np.array(self.weights, dtype=np.float64)
        if ids.ndim != 2 or w.shape != ids.shape:
            raise ValueError(f"bone_ids {ids.shape} and weights {w.shape} must match, 2-D")
        if ids.shape[0] < 1:
            raise ValueError("need at least one vertex")
        if ids.shape[1] > MAX_INFLUENCES:
            raise ValueError(f"at most {MAX_INFLUENCES} influences per vertex, got {ids.shape[1]} slots")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        used = ids != NO_BONE
        if np.any(w[~used] != 0.0):
            raise ValueError("unused slots must carry zero weight")
        if np.any(w[used] < 0.0):
            raise ValueError("weights must be non-negative")
        if np.any(ids[used] < 0):
            raise ValueError("bone ids must be non-negative")
        if not used.any(axis=1).all():
            raise ValueError("every vertex needs at least one influence")
        sums = w.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > 1e-9):
            i = int(np.argmax(off))
            raise ValueError(f"vertex {i} weights sum to {sums[i]!r}, expected 1 within 1e-9")
        # duplicate bone ids within a vertex
        sentinel = np.iinfo(np.int64).max
        srt = np.sort(np.where(used, ids, sentinel), axis=1)
        if np.any((srt[:, 1:] == srt[:, :-1]) & (srt[:, 1:] != sentinel)):
            raise ValueError("bone ids must be unique per vertex")
        self.bone_ids = _frozen(ids, np.int64)
        self.weights = _frozen(w, np.float64)

    @classmethod
    def from_pairs(cls, pairs) -> "WeightMap":
        """Build from a per-vertex list of (bone_id, weight) pairs."""
        n = len(pairs)
        width = max(1, max(len(p) for p in pairs))
        ids = np.full((n, width), NO_BONE, dtype=np.int64)
        w = np.zeros((n, width), dtype=np.float64)
        for i, entry in enumerate(pairs):
            for s, (bone, weight) in enumerate(entry):
                ids[i, s] = bone
                w[i, s] = weight
        return cls(ids, w)

    @property
    def vertex_count(self) -> int:
        return self.bone_ids.shape[0]

    def influences(self, vertex_id: int) -> list[tuple[int, float]]:
        mask = self.bone_ids[vertex_id] != NO_BONE
        return list(zip(self.bone_ids[vertex_id][mask].tolist(),
                        self.weights[vertex_id][mask].tolist()))

    def used_bones(self) -> np.ndarray:
        ids = self.bone_ids[self.bone_ids != NO_BONE]
        return np.unique(ids)

    def to_dense(self, bone_count: int) -> np.ndarray:
        """Dense (N, bone_count) weight matrix."""
        self.validate_against(bone_count)
        dense = np.zeros((self.vertex_count, bone_count))
        rows = np.repeat(np.arange(self.vertex_count), self.bone_ids.shape[1])
        cols = self.bone_ids.reshape(-1)
        vals = self.weights.reshape(-1)
        ok = cols != NO_BONE
        dense[rows[ok], cols[ok]] = vals[ok]
        return dense

    def validate_against(self, bone_count: int) -> None:
        top = self.used_bones()
        if top.size and top[-1] >= bone_count:
            raise ValueError(f"weight map references bone {top[-1]} but only {bone_count} exist")


@dataclass
class BoneTransformSet:
    """Per-frame affine transforms for every bone: (P, B, 3, 4) float64."""

    transforms: np.ndarray

    def __post_init__(self):
        t = np.array(self.transforms, dtype=np.float64)
        if t.ndim != 4 or t.shape[2:] != (3, 4):
            raise ValueError(f"transforms must be (frames, bones, 3, 4), got {t.shape}")
        if t.shape[0] < 1 or t.shape[1] < 1:
            raise ValueError("need at least one frame and one bone")
        if not np.all(np.isfinite(t)):
            raise ValueError("transforms must be finite")
        self.transforms = _frozen(t, np.float64)

    @staticmethod
    def identity(frame_count: int, bone_count: int) -> "BoneTransformSet":
        eye = np.zeros((frame_count, bone_count, 3, 4))
        eye[:, :] = np.eye(3, 4)
        return BoneTransformSet(eye)

    @property
    def frame_count(self) -> int:
        return self.transforms.shape[0]

    @property
    def bone_count(self) -> int:
        return self.transforms.shape[1]


@dataclass
class SkinningModel:
    """Compressed animation: rest pose + sparse weights + per-frame bone transforms."""

    rest_pose: np.ndarray
    weights: WeightMap
    transforms: BoneTransformSet
    faces: np.ndarray

    def __post_init__(self):
        rest = np.array(self.rest_pose, dtype=np.float64)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if rest.ndim != 2 or rest.shape[1] != 3:
            raise ValueError(f"rest pose must be (vertices, 3), got {rest.shape}")
        if not np.all(np.isfinite(rest)):
            raise ValueError("rest pose must be finite")
        n = rest.shape[0]
        if self.weights.vertex_count != n:
            raise ValueError(
                f"weight map covers {self.weights.vertex_count} vertices, rest pose has {n}")
        self.weights.validate_against(self.transforms.bone_count)
        if faces.size and (faces.min() < 0 or faces.max() >= n):
            raise ValueError(f"face indices must lie in [0, {n})")
        self.rest_pose = _frozen(rest, np.float64)
        self.faces = _frozen(faces, np.int64)

    @property
    def vertex_count(self) -> int:
        return self.rest_pose.shape[0]

    @property
    def bone_count(self) -> int:
        return self.transforms.bone_count

    @property
    def frame_count(self) -> int:
        return self.transforms.frame_count


def lbs_vertex(rest, influences, frame_transforms) -> np.ndarray:
    """Deform one vertex: sum of weighted affine transforms of the rest position.

    rest             : (3,) rest-pose position
    influences       : iterable of (bone_id, weight), weights convex
    frame_transforms : (B, 3, 4) transforms of one frame
    """
    transforms = np.asarray(frame_transforms, dtype=np.float64)
    if transforms.ndim != 3 or transforms.shape[1:] != (3, 4):
        raise ValueError(f"frame transforms must be (bones, 3, 4), got {transforms.shape}")
    h = np.append(np.asarray(rest, dtype=np.float64), 1.0)
    out = np.zeros(3)
    for bone, weight in influences:
        bone = int(bone)
        if bone < 0 or bone >= transforms.shape[0]:
            raise IndexError(f"bone id {bone} out of range for {transforms.shape[0]} bones")
        out += weight * (transforms[bone] @ h)
    return out


def lbs_sequence(model: SkinningModel) -> AnimSequence:
    """Evaluate the skinning model for every frame and vertex."""
    n = model.vertex_count
    p = model.frame_count
    rest1 = np.concatenate([model.rest_pose, np.ones((n, 1))], axis=1)  # (N, 4)
    ids = model.weights.bone_ids
    w = model.weights.weights
    out = np.zeros((p, n, 3))
    for frame in range(p):
        t = model.transforms.transforms[frame]  # (B, 3, 4)
        acc = np.zeros((n, 3))
        for slot in range(ids.shape[1]):
            mask = ids[:, slot] != NO_BONE
            if not mask.any():
                continue
            m = t[ids[mask, slot]]  # (n_used, 3, 4)
            acc[mask] += w[mask, slot, None] * np.einsum("vck,vk->vc", m, rest1[mask])
        out[frame] = acc
    return AnimSequence(out, model.faces, model.rest_pose)


def trajectory(seq: AnimSequence, vertex_id: int) -> np.ndarray:
    """Flat (3P,) vector of one vertex's positions over all frames, frame-major."""
    if not 0 <= vertex_id < seq.vertex_count:
        raise IndexError(f"vertex id {vertex_id} out of range for {seq.vertex_count} vertices")
    return seq.positions[:, vertex_id, :].reshape(-1).copy()


def trajectories(seq: AnimSequence) -> np.ndarray:
    """All trajectories stacked as an (N, 3P) matrix."""
    return np.ascontiguousarray(seq.positions.transpose(1, 0, 2).reshape(seq.vertex_count, -1))


def face_normals(seq: AnimSequence, frame: int) -> np.ndarray:
    """Unit normals, one per face, from counterclockwise vertex order."""
    if not 0 <= frame < seq.frame_count:
        raise IndexError(f"frame {frame} out of range for {seq.frame_count} frames")
    if seq.face_count == 0:
        return np.zeros((0, 3))
    tri = seq.positions[frame][seq.faces]  # (F, 3, 3)
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(normals, axis=1)
    bad = norms < 1e-20
    if bad.any():
        raise DegenerateFaceError(frame, np.flatnonzero(bad))
    return normals / norms[:, None]


# Synthetic articulated-chain rig: a tube of quad rings bent by per-joint
# sinusoidal rotations. Stands in for rigged training data at desk scale.

_RING = 4
_RING_RADIUS = 0.25
_BLEND_HALF_WIDTH = 0.25


def _rotation(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    m = np.eye(4)
    if axis == "z":
        m[0, 0], m[0, 1], m[1, 0], m[1, 1] = c, -s, s, c
    else:  # y
        m[0, 0], m[0, 2], m[2, 0], m[2, 2] = c, s, -s, c
    return m


def _pivot_rotation(axis: str, angle: float, pivot: np.ndarray) -> np.ndarray:
    fwd = np.eye(4)
    fwd[:3, 3] = pivot
    back = np.eye(4)
    back[:3, 3] = -pivot
    return fwd @ _rotation(axis, angle) @ back


def _chain_weights(xs: np.ndarray, bones: int) -> list[list[tuple[int, float]]]:
    pairs = []
    for x in xs:
        if bones == 1:
            pairs.append([(0, 1.0)])
            continue
        boundary = int(round(x))
        d = _BLEND_HALF_WIDTH
        if 1 <= boundary <= bones - 1 and abs(x - boundary) < d:
            t = (x - (boundary - d)) / (2.0 * d)
            s = t * t * (3.0 - 2.0 * t)  # smoothstep falloff across the joint
            entry = [(boundary - 1, 1.0 - s), (boundary, s)]
            pairs.append([(b, w) for b, w in entry if w > 0.0])
        else:
            pairs.append([(min(bones - 1, int(np.floor(x))), 1.0)])
    return pairs


def make_synthetic_rig(bones: int, vertices_per_segment: int, frames: int,
                       seed: int = 0) -> tuple[AnimSequence, WeightMap, BoneTransformSet]:
    """Generate an articulated-tube animation with known weights and transforms.

    The tube spans one unit of x per bone and carries `vertices_per_segment`
    vertices per bone (rounded to whole rings of 4). Vertices near interior
    joints blend two bones with a smoothstep falloff; all others are rigid.
    Joint angles vary sinusoidally per frame, so trajectories are smooth and
    bounded. Deterministic in `seed`.

    Returns (sequence, weights, transforms); applying the skinning model
    reproduces the returned sequence exactly.
    """
    if bones < 1:
        raise ValueError("bones must be >= 1")
    if frames < 2:
        raise ValueError("frames must be >= 2")
    if vertices_per_segment < 1:
        raise ValueError("vertices_per_segment must be >= 1")

    rng = np.random.default_rng(seed)
    rings_per_segment = max(1, int(round(vertices_per_segment / _RING)))
    total_rings = max(2, bones * rings_per_segment)
    ring_x = np.linspace(0.0, float(bones), total_rings)
    ring_angles = np.deg2rad([45.0, 135.0, 225.0, 315.0])

    rest = np.empty((total_rings * _RING, 3))
    for r, x in enumerate(ring_x):
        for k, a in enumerate(ring_angles):
            rest[r * _RING + k] = (x, _RING_RADIUS * np.cos(a), _RING_RADIUS * np.sin(a))

    faces = []
    for r in range(total_rings - 1):
        for k in range(_RING):
            a = r * _RING + k
            b = r * _RING + (k + 1) % _RING
            c = (r + 1) * _RING + (k + 1) % _RING
            d = (r + 1) * _RING + k
            faces.append((a, b, c))
            faces.append((a, c, d))

    weights = WeightMap.from_pairs(_chain_weights(np.repeat(ring_x, _RING), bones))

    amp = rng.uniform(0.25, 0.6, size=bones)
    freq = rng.integers(1, 3, size=bones)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=bones)
    root_amp = rng.uniform(0.1, 0.3, size=2)
    root_phase = rng.uniform(0.0, 2.0 * np.pi, size=2)

    all_t = np.empty((frames, bones, 3, 4))
    for p in range(frames):
        tau = p / frames
        g = np.eye(4)
        g[0, 3] = root_amp[0] * np.sin(2.0 * np.pi * tau + root_phase[0])
        g[1, 3] = root_amp[1] * np.sin(4.0 * np.pi * tau + root_phase[1])
        for j in range(bones):
            angle = amp[j] * np.sin(2.0 * np.pi * freq[j] * tau + phase[j])
            axis = "z" if j % 2 == 0 else "y"
            g = g @ _pivot_rotation(axis, angle, np.array([float(j), 0.0, 0.0]))
            all_t[p, j] = g[:3, :]

    transforms = BoneTransformSet(all_t)
    model = SkinningModel(rest, weights, transforms, np.asarray(faces, dtype=np.int64))
    return lbs_sequence(model), weights, transforms
