"""Pure numpy hot loops; the fallback for the compiled ``_ckernels``.

A scene is passed as a hyperplane arrangement: ``normals`` (F, N), all
family offsets concatenated in ``offsets`` with family f occupying
``offsets[ptr[f]:ptr[f+1]]`` (sorted ascending), and an integer ``rule``
that folds the per-family counts into a canonical cell code.

Projections are accumulated coordinate by coordinate in index order so that
this module, the compiled kernel and the scalar reference in ``scene``
produce bit-identical cell codes.
"""
import numpy as np

RULE_SINGLE = 0
RULE_COUNTS = 1
RULE_DOUBLE_DOT = 2
RULE_ANY = 3

TAG_SHIFT = 48
COUNT_BITS = 16

MOMENT_FLOOR = 1e-300

# bytes of float64 scratch per chunk in scan_first_crossings
_CHUNK_BYTES = 32 << 20


def _project(points, normal):
    p = points[..., 0] * normal[0]
    for j in range(1, normal.shape[0]):
        p = p + points[..., j] * normal[j]
    return p


def family_counts(points, normals, offsets, ptr):
    """Number of hyperplanes at or below each point, per family: (..., F) int64."""
    points = np.asarray(points, dtype=np.float64)
    F = normals.shape[0]
    out = np.empty(points.shape[:-1] + (F,), dtype=np.int64)
    for f in range(F):
        offs = offsets[ptr[f]:ptr[f + 1]]
        out[..., f] = np.searchsorted(offs, _project(points, normals[f]), side="right")
    return out


def fold_counts(counts, rule):
    """Canonical int64 cell code from per-family counts (last axis)."""
    counts = np.asarray(counts, dtype=np.int64)
    shape = counts.shape[:-1]
    if rule == RULE_SINGLE:
        return np.zeros(shape, dtype=np.int64)
    if rule == RULE_ANY:
        return np.any(counts > 0, axis=-1).astype(np.int64)
    if rule == RULE_COUNTS:
        code = np.zeros(shape, dtype=np.int64)
        for f in range(counts.shape[-1]):
            code |= counts[..., f] << (COUNT_BITS * f)
        return code
    if rule == RULE_DOUBLE_DOT:
        nl, nr, nc, nb = (counts[..., i] for i in range(4))
        nd = (nl == 0) & (nr == 0) & (nc == 0)
        band = nb == 1
        side = np.where(nb == 2, 3, 2).astype(np.int64)
        code = np.where(band, (np.int64(1) << TAG_SHIFT) | nc,
                        (side << TAG_SHIFT) | (nl << COUNT_BITS) | nr)
        return np.where(nd, 0, code).astype(np.int64)
    raise ValueError(f"unknown cell rule {rule}")


def cell_codes(points, normals, offsets, ptr, rule):
    if rule == RULE_SINGLE:
        return np.zeros(np.shape(points)[:-1], dtype=np.int64)
    return fold_counts(family_counts(points, normals, offsets, ptr), rule)


def scan_first_crossings(points, dirs, r, normals, offsets, ptr, rule, lo, hi):
    """First cell change along every ray of every point.

    Returns ``first`` (K, M) int32 holding the smallest k in 1..r whose sample
    lies in a different cell than sample k-1 (0 when there is none), and
    ``trunc`` (K, M) bool, set when the ray leaves the box [lo, hi] before k=r.
    Samples past the first out-of-box sample are ignored.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    K, N = points.shape
    M = dirs.shape[0]
    first = np.zeros((K, M), dtype=np.int32)
    trunc = np.zeros((K, M), dtype=bool)
    if K == 0:
        return first, trunc
    ks = np.arange(r + 1, dtype=np.float64)
    per_point = M * (r + 1) * N * 8 * 4
    step = max(1, _CHUNK_BYTES // per_point)
    for s in range(0, K, step):
        pts = points[s:s + step]
        # (k, M, r+1, N): sample j of ray m is origin + j * dir_m
        samples = pts[:, None, None, :] + ks[None, None, :, None] * dirs[None, :, None, :]
        inside = np.all((samples >= lo) & (samples <= hi), axis=-1)
        inside[:, :, 0] = True
        # a sample counts only if every sample before it was inside the box
        alive = np.logical_and.accumulate(inside, axis=2)
        codes = cell_codes(samples, normals, offsets, ptr, rule)
        change = (codes[:, :, 1:] != codes[:, :, :-1]) & alive[:, :, 1:]
        has = change.any(axis=2)
        first[s:s + step] = np.where(has, change.argmax(axis=2) + 1, 0)
        trunc[s:s + step] = ~alive[:, :, -1]
    return first, trunc


def adam_update(flat, grad, m, v, beta1, beta2, eps, step_size, c2):
    """In-place Adam step; ``step_size`` is lr / (1 - beta1**t), ``c2`` is 1 - beta2**t.

    Operation order matches the compiled loop exactly.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    # moments of dead units decay into subnormals, which are very slow
    m[np.abs(m) < MOMENT_FLOOR] = 0.0
    v *= beta2
    tmp = grad * grad
    tmp *= 1.0 - beta2
    v += tmp
    np.divide(v, c2, out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += eps
    np.divide(m, tmp, out=tmp)
    tmp *= step_size
    flat -= tmp
