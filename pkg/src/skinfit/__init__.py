"""skinfit: compress mesh-animation sequences into linear-blend-skinning models.

A raw animation (per-frame vertex positions) is approximated by proxy bones,
at most six convex weights per vertex, and one affine 3x4 transform per bone
per frame. Weights are initialized by a trajectory classifier or clustering
and refined together with the transforms by alternating constrained least
squares.
"""
from .anim import (AnimSequence, BoneTransformSet, DegenerateFaceError, SkinningModel,
                   WeightMap, face_normals, lbs_sequence, lbs_vertex,
                   make_synthetic_rig, trajectories, trajectory)
from .bones import extract_weights
from .cluster import cluster_trajectories
from .codec import CodecError, decode, encode, report_sizes
from .fitting import (CglsResult, ConvergenceWarning, DegenerateVertexWarning, FitStep,
                      FitTrace, RankDeficiencyWarning, SolverConfig, alternate, cgls,
                      nnls, solve_transforms, solve_weights)
from .metrics import (DegenerateSequenceError, ErrorReport, NegativeCompressionWarning,
                      compression_rate, dis_per, erms, max_avg_dist, norm_distort,
                      per_vertex_error)
from .pipeline import DecomposeResult, decompose
from .training import EpochStats, TrainConfig, train

__version__ = "0.1.0"
