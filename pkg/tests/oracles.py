"""Independent reference implementations used by the tests.

They deliberately avoid the package's cell-code folding and scan kernels:
cells are keyed by plain Python tuples of per-family line counts.
"""
import math

import numpy as np


def family_counts(scene, x):
    return tuple(sum(1 for o in f.offsets if float(np.dot(f.normal, x)) >= o) for f in scene.families)


def cell_key(scene, x):
    c = family_counts(scene, x)
    if scene.rule == "double-dot":
        nL, nR, nC, nB = c
        if nL == nR == nC == 0:
            return ("ND",)
        if nB == 1:
            return ("band", nC)
        return ("side", nB, nL, nR)
    if scene.rule == "any":
        return ("in",) if sum(c) == 0 else ("out",)
    if scene.rule == "single":
        return ()
    return c


def brute_force_weight(scene, origin, direction, r, gamma=lambda k: 1.0 / k):
    """Max of gamma over every cell change along the ray, stopping at the extent."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    weights = []
    prev = cell_key(scene, origin)
    truncated = False
    for k in range(1, r + 1):
        p = origin + k * direction
        if np.any(p < scene.lo) or np.any(p > scene.hi):
            truncated = True
            break
        key = cell_key(scene, p)
        if key != prev:
            weights.append(gamma(k))
        prev = key
    return (max(weights) if weights else 0.0), truncated


def analytic_first_crossing(scene, origin, direction, r):
    """First sample index k at which any plane of a counts-rule scene is crossed.

    Uses the closed-form parameter t* = (offset - n.x0) / (n.d) of each plane;
    returns 0 if no crossing happens within r samples or before leaving the box.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    best = math.inf
    for f in scene.families:
        nd = float(f.normal @ direction)
        if nd == 0:
            continue
        for o in f.offsets:
            t = (o - float(f.normal @ origin)) / nd
            k = math.ceil(t) if nd > 0 else math.floor(t) + 1
            if k >= 1:
                best = min(best, k)
    # box exit: first k with a coordinate out of range
    exit_k = math.inf
    for j in range(scene.dims):
        dj = direction[j]
        if dj > 0:
            exit_k = min(exit_k, math.floor((scene.hi[j] - origin[j]) / dj) + 1)
        elif dj < 0:
            exit_k = min(exit_k, math.floor((origin[j] - scene.lo[j]) / -dj) + 1)
    if best <= r and best < exit_k:
        return int(best)
    return 0
