"""Pure numpy implementations of the GF(2^8) hot kernels.

Signatures mirror the compiled ``_kernels`` extension exactly; the selector in
``regencore.kernels`` picks one at import time.
"""

import numpy as np


def matmul(a, b, mul):
    """Return ``a @ b`` over GF(2^8); ``a`` is m x p, ``b`` is p x L."""
    m, p = a.shape
    if b.shape[0] != p:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    out = np.zeros((m, b.shape[1]), dtype=np.uint8)
    for j in range(p):
        col = a[:, j]
        if not col.any():
            continue
        out ^= mul[col[:, None], b[j][None, :]]
    return out


def invert(a, mul, inv):
    """Gauss-Jordan inverse of a square matrix, or ``None`` when singular."""
    n = a.shape[0]
    work = np.zeros((n, 2 * n), dtype=np.uint8)
    work[:, :n] = a
    work[:, n:] = np.eye(n, dtype=np.uint8)
    for c in range(n):
        nz = np.flatnonzero(work[c:, c])
        if nz.size == 0:
            return None
        p = c + nz[0]
        if p != c:
            work[[c, p]] = work[[p, c]]
        work[c] = mul[inv[work[c, c]]][work[c]]
        factors = work[:, c].copy()
        factors[c] = 0
        rows = np.flatnonzero(factors)
        if rows.size:
            work[rows] ^= mul[factors[rows][:, None], work[c][None, :]]
    return np.ascontiguousarray(work[:, n:])


def rank(a, mul, inv):
    work = np.array(a, dtype=np.uint8, copy=True)
    rows, cols = work.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(work[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            work[[r, p]] = work[[p, r]]
        work[r] = mul[inv[work[r, c]]][work[r]]
        factors = work[:, c].copy()
        factors[r] = 0
        nzr = np.flatnonzero(factors)
        if nzr.size:
            work[nzr] ^= mul[factors[nzr][:, None], work[r][None, :]]
        r += 1
    return r
