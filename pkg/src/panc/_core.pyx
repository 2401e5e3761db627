# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the affinity / sparsify / solve hot path.

API mirrors panc.kernels.fallback; see that module for the contracts.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "compiled"

cdef double TAU_EPS = 1e-12


def affinity_from_sims(object sims, double tau):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(sims, dtype=np.float64)
    cdef Py_ssize_t m = s.shape[0]
    cdef Py_ssize_t n = s.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((m, n), dtype=np.float64)
    cdef double inv = 1.0 / (tau + TAU_EPS)
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[i, j] = exp(s[i, j] * inv)
        if i < n:
            out[i, i] = 0.0
    return out


cdef inline bint _ranks_below(double v1, Py_ssize_t c1, double v2, Py_ssize_t c2) nogil:
    # Entry 1 ranks below entry 2 when its value is smaller; ties rank the
    # higher column index lower, so lower columns survive selection.
    if v1 != v2:
        return v1 < v2
    return c1 > c2


cdef void _sift_down(double* hv, Py_ssize_t* hc, Py_ssize_t size, Py_ssize_t root) nogil:
    # Min-heap under _ranks_below: the root is the weakest kept entry.
    cdef Py_ssize_t child
    cdef double v = hv[root]
    cdef Py_ssize_t c = hc[root]
    while True:
        child = 2 * root + 1
        if child >= size:
            break
        if child + 1 < size and _ranks_below(hv[child + 1], hc[child + 1], hv[child], hc[child]):
            child += 1
        if _ranks_below(hv[child], hc[child], v, c):
            hv[root] = hv[child]
            hc[root] = hc[child]
            root = child
        else:
            break
    hv[root] = v
    hc[root] = c


def topk_rows(object w, Py_ssize_t xi):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] cols = np.empty((m, xi), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] vals = np.empty((m, xi), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hv_arr = np.empty(xi, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hc_arr = np.empty(xi, dtype=np.int64)
    cdef double* hv = <double*> hv_arr.data
    cdef cnp.int64_t* hc64 = <cnp.int64_t*> hc_arr.data
    cdef Py_ssize_t i, j, size, t, u
    cdef double v, cv
    cdef Py_ssize_t c, cc
    cdef Py_ssize_t* hc = <Py_ssize_t*> hc64  # int64 matches Py_ssize_t on this platform

    with nogil:
        for i in range(m):
            size = 0
            for j in range(m):
                if j == i:
                    continue
                v = a[i, j]
                if size < xi:
                    hv[size] = v
                    hc[size] = j
                    size += 1
                    if size == xi:
                        for t in range(xi // 2 - 1, -1, -1):
                            _sift_down(hv, hc, xi, t)
                elif _ranks_below(hv[0], hc[0], v, j):
                    hv[0] = v
                    hc[0] = j
                    _sift_down(hv, hc, xi, 0)
            # Insertion sort the selected entries by column index ascending.
            for t in range(xi):
                cols[i, t] = hc[t]
                vals[i, t] = hv[t]
            for t in range(1, xi):
                cc = cols[i, t]
                cv = vals[i, t]
                u = t - 1
                while u >= 0 and cols[i, u] > cc:
                    cols[i, u + 1] = cols[i, u]
                    vals[i, u + 1] = vals[i, u]
                    u -= 1
                cols[i, u + 1] = cc
                vals[i, u + 1] = cv
    return cols, vals


def csr_matmat(object data, object indices, object indptr, object dense):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = np.ascontiguousarray(data, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(dense, dtype=np.float64)
    cdef Py_ssize_t m = ptr.shape[0] - 1
    cdef Py_ssize_t k = b.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((m, k), dtype=np.float64)
    cdef Py_ssize_t i, p, j, c
    cdef double v
    with nogil:
        for i in range(m):
            for p in range(ptr[i], ptr[i + 1]):
                c = idx[p]
                v = d[p]
                for j in range(k):
                    out[i, j] += v * b[c, j]
    return out
