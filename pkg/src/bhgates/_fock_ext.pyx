# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bose-Hubbard hopping assembly over colex-ranked Fock states."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline long long _rank(long long* p, int n, long long[:, ::1] binom) nogil:
    cdef long long r = 0
    cdef int k
    for k in range(n):
        r += binom[p[k] + k, k + 1]
    return r


def hop_count(long long[:, ::1] pos, long long[::1] indptr):
    """Number of hopping entries generated from every state."""
    cdef Py_ssize_t D = pos.shape[0]
    cdef int n = pos.shape[1]
    cdef Py_ssize_t s
    cdef int k
    cdef long long total = 0, j
    with nogil:
        for s in range(D):
            for k in range(n):
                j = pos[s, k]
                if k > 0 and pos[s, k - 1] == j:
                    continue
                total += indptr[j + 1] - indptr[j]
    return total


def hop_entries(long long[:, ::1] pos, long long[::1] indptr, long long[::1] indices,
                long long[:, ::1] binom, long long row_offset=0):
    """COO triplets of sum_{i != j} a_i^dag a_j over the given states.

    ``pos`` holds each state's sorted particle positions; ``indptr`` and
    ``indices`` are the off-diagonal adjacency in CSR form. Row indices are
    target-state ranks, column indices are ``row_offset`` plus the source row.
    """
    cdef Py_ssize_t D = pos.shape[0]
    cdef int n = pos.shape[1]
    cdef long long total = hop_count(pos, indptr)
    rows_a = np.empty(total, dtype=np.int64)
    cols_a = np.empty(total, dtype=np.int64)
    vals_a = np.empty(total, dtype=np.float64)
    cdef long long[::1] rows = rows_a
    cdef long long[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    cdef long long tmp[64]
    cdef Py_ssize_t s, e = 0
    cdef int k, m, w, lj, li
    cdef long long j, i, ptr
    if n > 64:
        raise ValueError("at most 64 particles supported")
    with nogil:
        for s in range(D):
            k = 0
            while k < n:
                j = pos[s, k]
                lj = 1
                while k + lj < n and pos[s, k + lj] == j:
                    lj += 1
                for ptr in range(indptr[j], indptr[j + 1]):
                    i = indices[ptr]
                    li = 0
                    for m in range(n):
                        if pos[s, m] == i:
                            li += 1
                    # drop one particle at j, insert one at i, keep sorted
                    w = 0
                    for m in range(n):
                        if m == k:
                            continue
                        tmp[w] = pos[s, m]
                        w += 1
                    m = n - 1
                    while m > 0 and tmp[m - 1] > i:
                        tmp[m] = tmp[m - 1]
                        m -= 1
                    tmp[m] = i
                    rows[e] = _rank(tmp, n, binom)
                    cols[e] = row_offset + s
                    vals[e] = sqrt(<double>((li + 1) * lj))
                    e += 1
                k += lj
    return rows_a, cols_a, vals_a
