# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euclidean distance kernel for the neighbor-density scorer."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"


def pairwise_dists(object queries, object points):
    """Euclidean distance matrix of shape (len(queries), len(points))."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(points, dtype=np.float64)
    if q.shape[1] != p.shape[1]:
        raise ValueError("dimension mismatch between queries and points")
    cdef Py_ssize_t nq = q.shape[0], np_ = p.shape[0], d = q.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nq, np_), dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(nq):
        for j in range(np_):
            acc = 0.0
            for k in range(d):
                diff = q[i, k] - p[j, k]
                acc += diff * diff
            out[i, j] = sqrt(acc)
    return out
