"""Log/antilog and full product tables for GF(2^8) under 0x11D."""

import numpy as np

POLY = 0x11D
GENERATOR = 0x02


def mul_slow(a: int, b: int) -> int:
    """Shift-and-reduce product; the reference the tables are checked against."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= POLY
    return result


def _build():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = mul_slow(x, GENERATOR)
    exp[255:510] = exp[:255]

    idx = log[1:, None] + log[None, 1:]
    mul = np.zeros((256, 256), dtype=np.uint8)
    mul[1:, 1:] = exp[idx]

    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[1:]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build()

# startup self-check against the bitwise reference on a sparse grid
for _a in range(0, 256, 7):
    for _b in range(0, 256, 5):
        if MUL[_a, _b] != mul_slow(_a, _b):  # pragma: no cover
            raise RuntimeError(f"GF table mismatch at {_a:#x}*{_b:#x}")
del _a, _b

for _t in (EXP, LOG, MUL, INV):
    _t.flags.writeable = False
