# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for elementary symmetric functions (batched rows)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def esf_batch(lam, Py_ssize_t kmax):
    cdef double[:, ::1] x = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.zeros((m, kmax + 1))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, i, j, top
    cdef double v
    for r in range(m):
        out[r, 0] = 1.0
        for i in range(n):
            v = x[r, i]
            top = i + 1 if i + 1 < kmax else kmax
            for j in range(top, 0, -1):
                out[r, j] += v * out[r, j - 1]
    return out_arr


def esf_deleted_batch(lam, Py_ssize_t kmax):
    cdef double[:, ::1] x = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.zeros((m, n, kmax + 1))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t r, d, i, j, top, cnt
    cdef double v
    for r in range(m):
        for d in range(n):
            out[r, d, 0] = 1.0
            cnt = 0
            for i in range(n):
                if i == d:
                    continue
                v = x[r, i]
                cnt += 1
                top = cnt if cnt < kmax else kmax
                for j in range(top, 0, -1):
                    out[r, d, j] += v * out[r, d, j - 1]
    return out_arr
