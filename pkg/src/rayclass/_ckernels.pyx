# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: ray scanning and the fused Adam update.

Same contract and bitwise-identical results as ``rayclass._kernels``.
"""
import numpy as np
from libc.stdint cimport int64_t, int32_t, uint8_t
from libc.math cimport sqrt, fabs

cdef enum:
    RULE_SINGLE = 0
    RULE_COUNTS = 1
    RULE_DOUBLE_DOT = 2
    RULE_ANY = 3
    TAG_SHIFT = 48
    COUNT_BITS = 16
    MAX_FAMILIES = 16
    MAX_DIMS = 8

cdef double MOMENT_FLOOR = 1e-300


cdef inline int64_t _count_le(const double* offsets, Py_ssize_t lo, Py_ssize_t hi, double p) noexcept nogil:
    # bisect_right on offsets[lo:hi], returned relative to lo
    cdef Py_ssize_t a = lo, b = hi, mid
    while a < b:
        mid = (a + b) >> 1
        if p < offsets[mid]:
            b = mid
        else:
            a = mid + 1
    return a - lo


cdef inline int64_t _code(const double* s, Py_ssize_t N, Py_ssize_t F, const double* normals,
                          const double* offsets, const int64_t* ptr, int rule,
                          int64_t* counts) noexcept nogil:
    cdef Py_ssize_t f, j
    cdef double p
    cdef int64_t code = 0
    if rule == RULE_SINGLE:
        return 0
    for f in range(F):
        p = s[0] * normals[f * N]
        for j in range(1, N):
            p = p + s[j] * normals[f * N + j]
        counts[f] = _count_le(offsets, ptr[f], ptr[f + 1], p)
    if rule == RULE_ANY:
        for f in range(F):
            if counts[f] > 0:
                return 1
        return 0
    if rule == RULE_COUNTS:
        for f in range(F):
            code = code | (counts[f] << (COUNT_BITS * f))
        return code
    # RULE_DOUBLE_DOT: families are (L, R, C, band)
    if counts[0] == 0 and counts[1] == 0 and counts[2] == 0:
        return 0
    if counts[3] == 1:
        return ((<int64_t>1) << TAG_SHIFT) | counts[2]
    if counts[3] == 2:
        code = 3
    else:
        code = 2
    return (code << TAG_SHIFT) | (counts[0] << COUNT_BITS) | counts[1]


cdef inline const double* _dptr(const double[::1] a):
    return &a[0] if a.shape[0] > 0 else NULL


def cell_codes(points, normals, offsets, ptr, int rule):
    shape = tuple(np.shape(points))
    cdef Py_ssize_t N = shape[len(shape) - 1]
    cdef const double[:, ::1] pts = np.ascontiguousarray(np.reshape(points, (-1, N)), dtype=np.float64)
    cdef const double[::1] nrm = np.ascontiguousarray(normals, dtype=np.float64).ravel()
    cdef const double[::1] offs = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const int64_t[::1] pt = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef Py_ssize_t K = pts.shape[0], F = pt.shape[0] - 1, i
    cdef int64_t counts[MAX_FAMILIES]
    if F > MAX_FAMILIES:
        raise ValueError("too many hyperplane families")
    cdef const double* nrm_p = _dptr(nrm)
    cdef const double* offs_p = _dptr(offs)
    cdef const int64_t* pt_p = &pt[0]
    out = np.zeros(K, dtype=np.int64)
    cdef int64_t[::1] o = out
    if rule != RULE_SINGLE:
        with nogil:
            for i in range(K):
                o[i] = _code(&pts[i, 0], N, F, nrm_p, offs_p, pt_p, rule, counts)
    return out.reshape(shape[:len(shape) - 1])


def scan_first_crossings(points, dirs, int r, normals, offsets, ptr, int rule, lo, hi):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] dv = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef const double[::1] nrm = np.ascontiguousarray(normals, dtype=np.float64).ravel()
    cdef const double[::1] offs = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const int64_t[::1] pt = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef const double[::1] blo = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] bhi = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t K = pts.shape[0], N = pts.shape[1], M = dv.shape[0], F = pt.shape[0] - 1
    cdef Py_ssize_t i, m, j
    cdef int k
    cdef double s[MAX_DIMS]
    cdef int64_t counts[MAX_FAMILIES]
    cdef int64_t prev, cur, nxt
    cdef bint ok, found
    if N > MAX_DIMS:
        raise ValueError("too many dimensions")
    if F > MAX_FAMILIES:
        raise ValueError("too many hyperplane families")
    if blo.shape[0] != N or bhi.shape[0] != N or dv.shape[1] != N:
        raise ValueError("dimension mismatch between points, directions and extent")
    cdef const double* nrm_p = _dptr(nrm)
    cdef const double* offs_p = _dptr(offs)
    cdef const int64_t* pt_p = &pt[0]
    first_arr = np.zeros((K, M), dtype=np.int32)
    trunc_arr = np.zeros((K, M), dtype=np.uint8)
    cdef int32_t[:, ::1] first = first_arr
    cdef uint8_t[:, ::1] trunc = trunc_arr
    with nogil:
        for i in range(K):
            prev = _code(&pts[i, 0], N, F, nrm_p, offs_p, pt_p, rule, counts)
            for m in range(M):
                cur = prev
                found = rule == RULE_SINGLE
                for k in range(1, r + 1):
                    ok = True
                    for j in range(N):
                        s[j] = pts[i, j] + (<double>k) * dv[m, j]
                        if s[j] < blo[j] or s[j] > bhi[j]:
                            ok = False
                    if not ok:
                        trunc[i, m] = 1
                        break
                    if found:
                        continue
                    nxt = _code(s, N, F, nrm_p, offs_p, pt_p, rule, counts)
                    if nxt != cur:
                        first[i, m] = k
                        found = True
                    cur = nxt
    return first_arr, trunc_arr.view(bool)


def adam_update(double[::1] flat, const double[::1] grad, double[::1] m, double[::1] v,
                double beta1, double beta2, double eps, double step_size, double c2):
    """Fused in-place Adam step; ``step_size`` is lr / (1 - beta1**t), ``c2`` is 1 - beta2**t."""
    cdef Py_ssize_t n = flat.shape[0]
    if grad.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_update: buffer sizes differ")
    if n == 0:
        return
    with nogil:
        _adam_loop(&flat[0], &grad[0], &m[0], &v[0], n, beta1, beta2, eps, step_size, c2)


cdef void _adam_loop(double* p, const double* g, double* m,
                     double* v, Py_ssize_t n, double b1, double b2, double eps,
                     double step_size, double c2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a1 = 1.0 - b1, a2 = 1.0 - b2, mi, vi
    for i in range(n):
        mi = m[i] * b1 + a1 * g[i]
        # moments of dead units decay into subnormals, which are very slow
        mi = mi if fabs(mi) >= MOMENT_FLOOR else 0.0
        vi = v[i] * b2 + (g[i] * g[i]) * a2
        m[i] = mi
        v[i] = vi
        p[i] = p[i] - (mi / (sqrt(vi / c2) + eps)) * step_size
