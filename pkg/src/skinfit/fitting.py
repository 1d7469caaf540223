"""Alternating constrained least-squares refinement of weights and transforms.

Each round fixes one block and solves the other exactly:

* transform fitting (TF): per frame, the residuals of all vertices are linear
  in that frame's 12B transform entries; the global system is block-diagonal
  by frame, so each frame's 3N x 12B least-squares problem is solved
  independently by conjugate gradient on the normal equations.
* weight fitting (WF): per vertex, the residuals across all frames involve
  only that vertex's few weights; each (3P+1) x k problem (3P position rows
  plus one convexity row) is solved under non-negativity by an active-set
  solver, then renormalized to sum exactly to 1.

The alternation starts with a TF step against the initial weights and then
runs `alternation_iterations` full (WF, TF) rounds. Weight support stays
frozen to the initial per-vertex bone sets: a solved weight may reach zero
but its slot is kept, so no re-selection happens between rounds.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .anim import NO_BONE, AnimSequence, BoneTransformSet, SkinningModel, WeightMap, lbs_sequence


class RankDeficiencyWarning(UserWarning):
    """A bone with (near) zero total influence made a transform solve singular."""


class ConvergenceWarning(UserWarning):
    """Conjugate gradient stopped at its iteration cap before reaching tolerance."""


class DegenerateVertexWarning(UserWarning):
    """A vertex whose candidate bones give no usable equations kept its old weights."""


@dataclass
class SolverConfig:
    alternation_iterations: int = 5
    cg_tolerance: float = 1e-10
    cg_max_iterations: int | None = None  # defaults to 10x the unknown count
    convexity_row_scale: float = 1.0
    damping: float = 1e-8  # Tikhonov term enabled only for rank-deficient solves

    def __post_init__(self):
        if self.alternation_iterations < 0:
            raise ValueError("alternation_iterations must be >= 0")
        if self.cg_tolerance <= 0.0:
            raise ValueError("cg_tolerance must be positive")
        if self.cg_max_iterations is not None and self.cg_max_iterations < 1:
            raise ValueError("cg_max_iterations must be >= 1")
        if self.convexity_row_scale <= 0.0:
            raise ValueError("convexity_row_scale must be positive")
        if self.damping <= 0.0:
            raise ValueError("damping must be positive")


@dataclass
class CglsResult:
    x: np.ndarray
    converged: bool
    iterations: int
    relative_residual: float


def cgls(apply_a, apply_at, b, config: SolverConfig | None = None,
         damping: float = 0.0) -> CglsResult:
    """Least-squares solve of min ||Ax - b||^2 (+ damping ||x||^2) by conjugate
    gradient on the normal equations.

    apply_a  : x -> A x
    apply_at : r -> A^T r

    Stops when ||A^T (b - Ax)|| / ||A^T b|| <= cg_tolerance or at the
    iteration cap; a capped run returns the best iterate with converged=False.
    """
    config = config or SolverConfig()
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    s = np.asarray(apply_at(b), dtype=np.float64).reshape(-1)
    x = np.zeros_like(s)
    gamma = float(s @ s)
    gradient0 = np.sqrt(gamma)
    if gradient0 == 0.0:
        return CglsResult(x, True, 0, 0.0)
    max_iterations = config.cg_max_iterations or 10 * s.size
    r = b.copy()
    p = s.copy()
    iterations = 0
    converged = False
    while iterations < max_iterations:
        iterations += 1
        q = np.asarray(apply_a(p), dtype=np.float64).reshape(-1)
        denom = float(q @ q) + damping * float(p @ p)
        if denom <= 0.0:
            break  # direction lies in the null space; nothing to gain
        alpha = gamma / denom
        x += alpha * p
        r -= alpha * q
        s = np.asarray(apply_at(r), dtype=np.float64).reshape(-1)
        if damping:
            s -= damping * x
        gamma_new = float(s @ s)
        if np.sqrt(gamma_new) <= config.cg_tolerance * gradient0:
            gamma = gamma_new
            converged = True
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return CglsResult(x, converged, iterations, float(np.sqrt(gamma) / gradient0))


def nnls(a: np.ndarray, b: np.ndarray, max_iterations: int | None = None) -> np.ndarray:
    """Non-negative least squares min ||a x - b||, x >= 0, by the classic
    active-set method. Intended for the small per-vertex systems (<= 6
    unknowns), where the passive-set subproblems are tiny dense solves."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    m, n = a.shape
    if b.size != m:
        raise ValueError(f"matrix has {m} rows but rhs has {b.size}")
    if max_iterations is None:
        max_iterations = 30 * max(n, 1)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = a.T @ b
    tol = 10.0 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.abs(w).max(initial=1.0)))
    inner = 0
    while not passive.all():
        masked = np.where(passive, -np.inf, w)
        j = int(np.argmax(masked))
        if masked[j] <= tol:
            break
        passive[j] = True
        while True:
            inner += 1
            if inner > max_iterations:
                return np.maximum(x, 0.0)
            z = np.zeros(n)
            if passive.any():
                sol, *_ = np.linalg.lstsq(a[:, passive], b, rcond=None)
                z[passive] = sol
            if not passive.any() or np.all(z[passive] > 0.0):
                x = z
                break
            # step toward z until the first passive variable hits zero
            negative = passive & (z <= 0.0)
            denom = x[negative] - z[negative]
            ratios = np.where(denom > 0.0, x[negative] / np.where(denom > 0.0, denom, 1.0), 0.0)
            alpha = float(ratios.min())
            x = x + alpha * (z - x)
            drop = passive & (x <= 1e-12 * max(1.0, float(x.max(initial=0.0))))
            drop &= negative | (x <= 0.0)
            if not drop.any():
                victims = np.flatnonzero(negative)
                drop[victims[int(np.argmin(ratios))]] = True
            passive &= ~drop
            x[~passive] = 0.0
        resid = b - a @ x
        w = a.T @ resid
    return np.maximum(x, 0.0)


def solve_transforms(seq: AnimSequence, weights: WeightMap, bone_count: int,
                     config: SolverConfig | None = None) -> BoneTransformSet:
    """Fit every frame's 3x4 bone transforms to the sequence under fixed weights.

    Each frame is an independent 3N-equation, 12B-unknown least-squares
    problem solved by `cgls`. Bones with zero total influence leave singular
    columns; those solves run with Tikhonov damping and emit a warning.
    """
    config = config or SolverConfig()
    dense = weights.to_dense(bone_count)  # (N, B)
    totals = dense.sum(axis=0)
    damping = 0.0
    dead = np.flatnonzero(totals <= 1e-12)
    if dead.size:
        warnings.warn(
            f"bones {dead.tolist()} have no influence; damping their transform solve",
            RankDeficiencyWarning, stacklevel=2)
        damping = config.damping

    n = seq.vertex_count
    rest1 = np.concatenate([seq.rest_pose, np.ones((n, 1))], axis=1)  # (N, 4)
    coeff = dense[:, :, None] * rest1[:, None, :]                     # (N, B, 4)

    def apply_a(x):
        t = x.reshape(bone_count, 3, 4)
        return np.einsum("njk,jck->nc", coeff, t).reshape(-1)

    def apply_at(r):
        res = r.reshape(n, 3)
        return np.einsum("njk,nc->jck", coeff, res).reshape(-1)

    out = np.empty((seq.frame_count, bone_count, 3, 4))
    unconverged = []
    for frame in range(seq.frame_count):
        result = cgls(apply_a, apply_at, seq.positions[frame].reshape(-1),
                      config=config, damping=damping)
        if not result.converged:
            unconverged.append(frame)
        out[frame] = result.x.reshape(bone_count, 3, 4)
    if unconverged:
        warnings.warn(
            f"transform solve hit the iteration cap at frames {unconverged[:8]}",
            ConvergenceWarning, stacklevel=2)
    return BoneTransformSet(out)


def solve_weights(seq: AnimSequence, transforms: BoneTransformSet, support: WeightMap,
                  config: SolverConfig | None = None) -> WeightMap:
    """Fit convex weights per vertex under fixed transforms.

    The support (candidate bones per vertex) is taken from `support`; a
    candidate may come back with weight zero but its slot is preserved. Each
    vertex solves 3P position rows plus one convexity row under w >= 0, then
    renormalizes exactly. Vertices whose candidates give no usable equations
    keep their previous weights and are reported in one warning.
    """
    config = config or SolverConfig()
    t = transforms.transforms  # (P, B, 3, 4)
    support.validate_against(transforms.bone_count)
    n = seq.vertex_count
    if support.vertex_count != n:
        raise ValueError(f"support covers {support.vertex_count} vertices, sequence has {n}")
    rest1 = np.concatenate([seq.rest_pose, np.ones((n, 1))], axis=1)
    scale = config.convexity_row_scale
    new_weights = np.zeros_like(support.weights)
    degenerate = []
    for i in range(n):
        slots = np.flatnonzero(support.bone_ids[i] != NO_BONE)
        candidates = support.bone_ids[i, slots]
        # (P, 3, k): candidate transforms applied to this vertex's rest position
        columns = np.einsum("pjck,k->pcj", t[:, candidates], rest1[i])
        system = columns.reshape(-1, candidates.size)
        if float(np.abs(system).max(initial=0.0)) < 1e-12:
            degenerate.append(i)
            new_weights[i] = support.weights[i]
            continue
        a = np.vstack([system, np.full((1, candidates.size), scale)])
        rhs = np.append(seq.positions[:, i, :].reshape(-1), scale)
        solution = nnls(a, rhs)
        total = solution.sum()
        if total <= 1e-12:
            degenerate.append(i)
            new_weights[i] = support.weights[i]
            continue
        new_weights[i, slots] = solution / total
    if degenerate:
        warnings.warn(
            f"{len(degenerate)} vertices (first {degenerate[:8]}) have degenerate "
            "candidate bones; kept previous weights", DegenerateVertexWarning, stacklevel=2)
    return WeightMap(support.bone_ids, new_weights)


@dataclass
class FitStep:
    index: int
    kind: str  # "TF" or "WF"
    objective: float  # summed squared reconstruction error over all frames
    erms: float


@dataclass
class FitTrace:
    steps: list[FitStep] = field(default_factory=list)

    CSV_HEADER = "step_index,kind,objective,erms"

    def csv_rows(self) -> list[str]:
        rows = [self.CSV_HEADER]
        rows += [f"{s.index},{s.kind},{s.objective:.17g},{s.erms:.17g}" for s in self.steps]
        return rows


def reconstruction_objective(orig: AnimSequence, recon: AnimSequence) -> float:
    """Summed squared vertex error over all frames."""
    return float(np.sum((recon.positions - orig.positions) ** 2))


def alternate(seq: AnimSequence, initial_weights: WeightMap, bone_count: int,
              config: SolverConfig | None = None) -> tuple[SkinningModel, FitTrace]:
    """Run the TF / (WF, TF)* alternation and trace the objective after every
    half-step. The trace has 1 + 2 * alternation_iterations entries."""
    config = config or SolverConfig()
    weights = initial_weights
    transforms = solve_transforms(seq, weights, bone_count, config)
    trace = FitTrace()

    def record(kind: str) -> SkinningModel:
        model = SkinningModel(seq.rest_pose, weights, transforms, seq.faces)
        recon = lbs_sequence(model)
        trace.steps.append(FitStep(
            index=len(trace.steps),
            kind=kind,
            objective=reconstruction_objective(seq, recon),
            erms=metrics.erms(seq, recon),
        ))
        return model

    model = record("TF")
    for _ in range(config.alternation_iterations):
        weights = solve_weights(seq, transforms, weights, config)
        model = record("WF")
        transforms = solve_transforms(seq, weights, bone_count, config)
        model = record("TF")
    return model, trace
