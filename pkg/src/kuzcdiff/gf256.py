"""Arithmetic in GF(2^8) with the Kuznyechik reduction polynomial.

Field elements are plain ints in [0, 255]; bit 0 is the constant coefficient.
Addition is XOR. Multiplication goes through a 256x256 table that is built once
at import by shift-and-reduce and then frozen.
"""

import numpy as np

# x^8 + x^7 + x^6 + x + 1  (not the AES polynomial 0x11B)
POLY = 0x1C3


def _shift_and_reduce(a: int, b: int) -> int:
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        if a & 0x100:
            a ^= POLY
        b >>= 1
    return result


def build_mul_table() -> np.ndarray:
    """Return the full multiplication table as a read-only uint8 array of shape (256, 256)."""
    table = np.zeros((256, 256), dtype=np.uint8)
    for a in range(256):
        for b in range(a, 256):
            table[a, b] = table[b, a] = _shift_and_reduce(a, b)
    table.setflags(write=False)
    return table


MUL = build_mul_table()
_MUL_ROWS = tuple(tuple(int(v) for v in row) for row in MUL)


def gf_mul(a: int, b: int) -> int:
    """Multiply two field elements."""
    return _MUL_ROWS[a][b]


def _build_inverse() -> np.ndarray:
    inv = np.zeros(256, dtype=np.uint8)
    rows, cols = np.nonzero(MUL == 1)
    inv[rows] = cols
    inv.setflags(write=False)
    return inv


INV = _build_inverse()


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no multiplicative inverse in GF(2^8)")
    return int(INV[a])
