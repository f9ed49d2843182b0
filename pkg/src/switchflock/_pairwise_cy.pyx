# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise hot loops; reference semantics live in _pairwise_np."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, pow, sqrt

cnp.import_array()


cdef inline double _weight(int fam, double p0, double p1, double r2) noexcept nogil:
    cdef double r, u
    if fam == 0:
        return p0
    if fam == 1:
        return pow(1.0 + r2, -p0)
    if fam == 2:
        return exp(-r2 / (p0 * p0))
    # bump
    r = sqrt(r2)
    if r >= p1:
        return p0
    u = r / p1
    return p0 + (1.0 - p0) * exp(1.0 - 1.0 / (1.0 - u * u))


def coupling_deriv(object x_obj, object src_obj, double scale,
                   int fam, double p0, double p1):
    cdef double[:, ::1] x = np.ascontiguousarray(x_obj, dtype=np.float64)
    cdef double[:, ::1] src = np.ascontiguousarray(src_obj, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double wmin = np.inf
    cdef double wmax = -np.inf
    cdef Py_ssize_t i, j, k
    cdef double r2, w, dk
    if fam not in (0, 1, 2, 3):
        raise ValueError("unknown family code %r" % fam)
    with nogil:
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                r2 = 0.0
                for k in range(d):
                    dk = x[j, k] - x[i, k]
                    r2 += dk * dk
                w = _weight(fam, p0, p1, r2)
                if w < wmin:
                    wmin = w
                if w > wmax:
                    wmax = w
                for k in range(d):
                    out[i, k] += w * (src[j, k] - src[i, k])
            for k in range(d):
                out[i, k] *= scale
    return out_arr, wmin, wmax


def max_pair_distance(object x_obj):
    cdef double[:, ::1] x = np.ascontiguousarray(x_obj, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef double best = 0.0
    cdef double r2, dk, r
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(n):
            for j in range(n):
                r2 = 0.0
                for k in range(d):
                    dk = x[i, k] - x[j, k]
                    r2 += dk * dk
                r = sqrt(r2)
                if r > best:
                    best = r
    return best


def diameter_series(object snaps_obj):
    cdef double[:, :, ::1] snaps = np.ascontiguousarray(snaps_obj, dtype=np.float64)
    cdef Py_ssize_t s = snaps.shape[0]
    cdef Py_ssize_t n = snaps.shape[1]
    cdef Py_ssize_t d = snaps.shape[2]
    out_arr = np.empty(s, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double best, r2, dk, r
    cdef Py_ssize_t t, i, j, k
    with nogil:
        for t in range(s):
            best = 0.0
            for i in range(n):
                for j in range(n):
                    r2 = 0.0
                    for k in range(d):
                        dk = snaps[t, i, k] - snaps[t, j, k]
                        r2 += dk * dk
                    r = sqrt(r2)
                    if r > best:
                        best = r
            out[t] = best
    return out_arr
