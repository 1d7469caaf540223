"""Trajectory clustering baseline for weight initialization.

K-means over flat (3P,) vertex trajectories with k-means++ seeding. Serves as
the initializer when no trained classifier is available: each cluster becomes
a candidate bone and every vertex gets a one-hot label for its cluster.
"""
from __future__ import annotations

import numpy as np

from .anim import AnimSequence, trajectories


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (N, k) matrix of squared Euclidean distances
    d = (points * points).sum(axis=1)[:, None] + (centroids * centroids).sum(axis=1)[None, :]
    d -= 2.0 * points @ centroids.T
    return np.maximum(d, 0.0)


def _seed_centroids(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = _squared_distances(points, centroids[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[choice]
        d2 = np.minimum(d2, _squared_distances(points, centroids[j:j + 1])[:, 0])
    return centroids


def cluster_trajectories(seq: AnimSequence, k: int, seed: int = 0,
                         max_iterations: int = 100, tol: float = 1e-9) -> np.ndarray:
    """Cluster vertices by trajectory; returns (N, k) one-hot labels.

    Deterministic in `seed`. Iterates until the largest centroid movement
    drops below `tol` or `max_iterations` passes. Clusters that empty out are
    re-seeded from the point farthest from its assigned centroid.
    """
    points = trajectories(seq)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(points, k, rng)

    def assign_with_reseed(fix_centroids: bool) -> np.ndarray:
        d = _squared_distances(points, centroids)
        assign = d.argmin(axis=1)
        own = d[np.arange(n), assign]
        for j in range(k):
            if not (assign == j).any():
                far = int(own.argmax())
                if fix_centroids:
                    centroids[j] = points[far]
                assign[far] = j
                own[far] = -np.inf
        return assign

    for _ in range(max_iterations):
        assign = assign_with_reseed(fix_centroids=True)
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = points[assign == j].mean(axis=0)
        move = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        if move < tol:
            break
    assign = assign_with_reseed(fix_centroids=False)

    labels = np.zeros((n, k), dtype=np.int64)
    labels[np.arange(n), assign] = 1
    return labels
