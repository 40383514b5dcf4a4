"""Arithmetic and dense linear algebra over GF(2^8).

Field elements are plain ints in [0, 255]; matrices are 2-D ``numpy.uint8``
arrays. The reduction polynomial is x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
"""

import numpy as np

from regencore import kernels
from regencore._tables import EXP, INV, LOG, MUL, POLY, mul_slow

__all__ = [
    "POLY", "SingularMatrixError", "add", "mul", "mul_slow", "inv", "div", "power",
    "as_matrix", "identity", "mat_mul", "mat_invert", "is_invertible", "mat_rank",
    "solve",
]


class SingularMatrixError(ArithmeticError):
    """Raised when a matrix that must be inverted has no inverse."""


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no multiplicative inverse in GF(2^8)")
    return int(INV[a])


def div(a: int, b: int) -> int:
    return mul(a, inv(b))


def power(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return int(EXP[(int(LOG[a]) * e) % 255])


def as_matrix(x) -> np.ndarray:
    m = np.asarray(x)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if m.dtype != np.uint8:
        if m.size and (m.min() < 0 or m.max() > 255):
            raise ValueError("field elements must lie in [0, 255]")
        m = m.astype(np.uint8)
    return np.ascontiguousarray(m)


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.uint8)


def mat_mul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return kernels.impl.matmul(a, b, MUL)


def mat_invert(a) -> np.ndarray:
    """Inverse of a square matrix; raises :class:`SingularMatrixError`."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"cannot invert non-square matrix of shape {a.shape}")
    out = kernels.impl.invert(a, MUL, INV)
    if out is None:
        raise SingularMatrixError(f"{a.shape[0]}x{a.shape[0]} matrix is singular")
    return out


def is_invertible(a) -> bool:
    a = as_matrix(a)
    return a.shape[0] == a.shape[1] and kernels.impl.rank(a, MUL, INV) == a.shape[0]


def mat_rank(a) -> int:
    a = as_matrix(a)
    if a.size == 0:
        return 0
    return int(kernels.impl.rank(a, MUL, INV))


def solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b``. ``b`` may be a vector or a matrix of right-hand sides."""
    vec = np.ndim(b) == 1
    x = mat_mul(mat_invert(a), as_matrix(b))
    return x[:, 0] if vec else x
