# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GF(2^8) kernels: region matrix product and Gauss-Jordan elimination."""

import numpy as np
cimport numpy as cnp
from libc.string cimport memset

cnp.import_array()


def matmul(const unsigned char[:, :] a, const unsigned char[:, :] b,
           const unsigned char[:, ::1] mul):
    cdef Py_ssize_t m = a.shape[0], p = a.shape[1], L = b.shape[1]
    if b.shape[0] != p:
        raise ValueError(f"inner dimensions differ: ({m}, {p}) x ({b.shape[0]}, {L})")
    out = np.zeros((m, L), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef Py_ssize_t i, j, x
    cdef unsigned char c
    cdef const unsigned char *row
    with nogil:
        for i in range(m):
            for j in range(p):
                c = a[i, j]
                if c == 0:
                    continue
                row = &mul[c, 0]
                if c == 1:
                    for x in range(L):
                        o[i, x] ^= b[j, x]
                else:
                    for x in range(L):
                        o[i, x] ^= row[b[j, x]]
    return out


cdef int _eliminate(unsigned char[:, ::1] w, Py_ssize_t rows, Py_ssize_t cols,
                    Py_ssize_t pivot_cols, const unsigned char[:, ::1] mul,
                    const unsigned char[::1] inv) noexcept nogil:
    """Reduce ``w`` in place over its first ``pivot_cols`` columns; return the rank."""
    cdef Py_ssize_t r = 0, c, i, x, p
    cdef unsigned char f, t
    cdef const unsigned char *mrow
    for c in range(pivot_cols):
        if r == rows:
            break
        p = -1
        for i in range(r, rows):
            if w[i, c] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for x in range(cols):
                t = w[r, x]
                w[r, x] = w[p, x]
                w[p, x] = t
        mrow = &mul[inv[w[r, c]], 0]
        for x in range(cols):
            w[r, x] = mrow[w[r, x]]
        for i in range(rows):
            if i == r:
                continue
            f = w[i, c]
            if f == 0:
                continue
            mrow = &mul[f, 0]
            for x in range(cols):
                w[i, x] ^= mrow[w[r, x]]
        r += 1
    return r


def invert(const unsigned char[:, :] a, const unsigned char[:, ::1] mul,
           const unsigned char[::1] inv):
    cdef Py_ssize_t n = a.shape[0], i, j
    if a.shape[1] != n:
        raise ValueError("matrix is not square")
    work = np.zeros((n, 2 * n), dtype=np.uint8)
    cdef unsigned char[:, ::1] w = work
    cdef int rk
    with nogil:
        for i in range(n):
            for j in range(n):
                w[i, j] = a[i, j]
            w[i, n + i] = 1
        rk = _eliminate(w, n, 2 * n, n, mul, inv)
    if rk < n:
        return None
    return np.ascontiguousarray(work[:, n:])


def rank(const unsigned char[:, :] a, const unsigned char[:, ::1] mul,
         const unsigned char[::1] inv):
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1], i, j
    work = np.zeros((rows, cols), dtype=np.uint8)
    cdef unsigned char[:, ::1] w = work
    cdef int rk
    with nogil:
        for i in range(rows):
            for j in range(cols):
                w[i, j] = a[i, j]
        rk = _eliminate(w, rows, cols, cols, mul, inv)
    return rk
