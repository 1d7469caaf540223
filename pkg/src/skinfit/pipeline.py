"""End-to-end decomposition: influence probabilities to a fitted skinning model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics
from .anim import AnimSequence, SkinningModel, lbs_sequence
from .bones import extract_weights
from .fitting import FitTrace, SolverConfig, alternate


@dataclass
class DecomposeResult:
    model: SkinningModel
    trace: FitTrace
    report: metrics.ErrorReport
    reconstruction: AnimSequence


def decompose(seq: AnimSequence, probabilities: np.ndarray, epsilon: float = 1e-3,
              config: SolverConfig | None = None) -> DecomposeResult:
    """Extract sparse weights from probabilities, refine by alternation, and
    evaluate the result against the input sequence."""
    weights, bone_count = extract_weights(probabilities, epsilon)
    model, trace = alternate(seq, weights, bone_count, config)
    recon = lbs_sequence(model)
    report = metrics.evaluate(seq, recon, bone_count=bone_count)
    return DecomposeResult(model, trace, report, recon)
