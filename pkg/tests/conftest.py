import numpy as np
import pytest

from skinfit.anim import AnimSequence, make_synthetic_rig


@pytest.fixture
def small_rig():
    """3-bone tube, 48 vertices, 10 frames; (sequence, weights, transforms)."""
    return make_synthetic_rig(3, 16, 10, seed=11)


def toy_pair():
    """1 vertex, 2 frames: original moves (0,0,0)->(2,0,0), approx stays put."""
    no_faces = np.zeros((0, 3), dtype=np.int64)
    orig = AnimSequence(np.array([[[0.0, 0, 0]], [[2.0, 0, 0]]]), no_faces,
                        np.array([[0.0, 0, 0]]))
    approx = AnimSequence(np.array([[[0.0, 0, 0]], [[0.0, 0, 0]]]), no_faces,
                          np.array([[0.0, 0, 0]]))
    return orig, approx


def random_sequence(rng, n, p, with_faces=True):
    """Random positions plus (when asked) random distinct-index faces.

    Continuous random coordinates make degenerate faces a measure-zero event.
    """
    positions = rng.normal(size=(p, n, 3))
    if with_faces and n >= 3:
        count = max(1, n - 2)
        faces = np.empty((count, 3), dtype=np.int64)
        for i in range(count):
            faces[i] = rng.choice(n, size=3, replace=False)
    else:
        faces = np.zeros((0, 3), dtype=np.int64)
    return AnimSequence(positions, faces, positions[0])


# Brute-force double-loop metric oracles, independent of the library's
# vectorized implementations.

def brute_dis_per(orig, approx):
    p, n = orig.positions.shape[:2]
    avg = [[sum(orig.positions[f][i][c] for f in range(p)) / p for c in range(3)]
           for i in range(n)]
    num = 0.0
    den = 0.0
    for f in range(p):
        for i in range(n):
            for c in range(3):
                num += (orig.positions[f][i][c] - approx.positions[f][i][c]) ** 2
                den += (orig.positions[f][i][c] - avg[i][c]) ** 2
    return 100.0 * (num ** 0.5) / (den ** 0.5)


def brute_erms(orig, approx):
    p, n = orig.positions.shape[:2]
    num = 0.0
    for f in range(p):
        for i in range(n):
            for c in range(3):
                num += (orig.positions[f][i][c] - approx.positions[f][i][c]) ** 2
    return 100.0 * (num ** 0.5) / ((3 * n * p) ** 0.5)


def brute_max_avg_dist(orig, approx):
    p, n = orig.positions.shape[:2]
    total = 0.0
    for f in range(p):
        worst = 0.0
        for i in range(n):
            d = sum((orig.positions[f][i][c] - approx.positions[f][i][c]) ** 2
                    for c in range(3)) ** 0.5
            worst = max(worst, d)
        total += worst
    return total / p


def _brute_normal(a, b, c):
    u = [b[i] - a[i] for i in range(3)]
    v = [c[i] - a[i] for i in range(3)]
    n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    length = (n[0] ** 2 + n[1] ** 2 + n[2] ** 2) ** 0.5
    return [x / length for x in n]


def brute_norm_distort(orig, approx):
    import math
    p = orig.positions.shape[0]
    f = orig.faces.shape[0]
    total = 0.0
    for frame in range(p):
        for face in orig.faces:
            n1 = _brute_normal(*(orig.positions[frame][i] for i in face))
            n2 = _brute_normal(*(approx.positions[frame][i] for i in face))
            cross = [n1[1] * n2[2] - n1[2] * n2[1],
                     n1[2] * n2[0] - n1[0] * n2[2],
                     n1[0] * n2[1] - n1[1] * n2[0]]
            total += (cross[0] ** 2 + cross[1] ** 2 + cross[2] ** 2) ** 0.5
    return math.asin(min(1.0, total / (f * p)))
