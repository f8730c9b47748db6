"""Inner and outer c-differential tables of 8-bit permutations.

outer:  counts[a][b] = #{x : F(x ^ a) ^ c*F(x) == b}
inner:  counts[a][b] = #{x : F(c*x ^ a) ^ F(x) == b}

Each table is a direct 2^16 enumeration done as one numpy gather plus a
bincount, so a full 255-value spectrum takes well under a second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf256 import MUL

INNER = "inner"
OUTER = "outer"
_X = np.arange(256, dtype=np.intp)


@dataclass(frozen=True)
class CDiffTable:
    orientation: str
    c: int
    counts: np.ndarray  # (256, 256) int64, indexed [a, b]


def as_permutation(F) -> np.ndarray:
    """Validate a 256-entry table and return it as an intp array."""
    arr = np.asarray(F)
    if arr.shape != (256,):
        raise ValueError(f"expected 256 entries, got shape {arr.shape}")
    arr = arr.astype(np.intp)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("entries must lie in [0, 255]")
    if len(np.unique(arr)) != 256:
        raise ValueError("table is not a permutation (repeated outputs)")
    return arr


def invert_permutation(F) -> np.ndarray:
    perm = as_permutation(F)
    inv = np.empty(256, dtype=np.intp)
    inv[perm] = _X
    return inv


def _check_c(c: int) -> int:
    if not 0 <= int(c) <= 255:
        raise ValueError(f"c must be a byte, got {c}")
    return int(c)


def _count(b_values: np.ndarray) -> np.ndarray:
    # b_values is (256 a-rows, 256 x-columns); tally b within each row
    flat = (_X[:, None] << 8) | b_values
    return np.bincount(flat.ravel(), minlength=65536).reshape(256, 256)


def _outer_counts(perm: np.ndarray, c: int) -> np.ndarray:
    return _count(perm[_X[None, :] ^ _X[:, None]] ^ MUL[c][perm][None, :])


def _inner_counts(perm: np.ndarray, c: int) -> np.ndarray:
    cx = MUL[c].astype(np.intp)
    return _count(perm[cx[None, :] ^ _X[:, None]] ^ perm[None, :])


def outer_cddt(F, c: int) -> CDiffTable:
    c = _check_c(c)
    return CDiffTable(OUTER, c, _outer_counts(as_permutation(F), c))


def inner_cddt(F, c: int) -> CDiffTable:
    c = _check_c(c)
    return CDiffTable(INNER, c, _inner_counts(as_permutation(F), c))


def c_uniformity(t: CDiffTable) -> int:
    """Max entry; at c=1 the row a=0 is excluded since it is trivially 256 at b=0."""
    counts = t.counts[1:] if t.c == 1 else t.counts
    return int(counts.max())


def full_spectrum(F, orientation: str = INNER) -> dict[int, int]:
    """delta for every c in 1..255."""
    perm = as_permutation(F)
    if orientation == INNER:
        build = _inner_counts
    elif orientation == OUTER:
        build = _outer_counts
    else:
        raise ValueError(f"orientation must be 'inner' or 'outer', got {orientation!r}")
    return {c: c_uniformity(CDiffTable(orientation, c, build(perm, c))) for c in range(1, 256)}


def verify_duality(F) -> bool:
    """Check outer(F, c)[a, b] == inner(F^-1, c)[b, a] for every c in 1..255."""
    perm = as_permutation(F)
    inv = invert_permutation(perm)
    for c in range(1, 256):
        if not np.array_equal(_outer_counts(perm, c), _inner_counts(inv, c).T):
            return False
    return True


def load_permutation_file(path) -> np.ndarray:
    """Read 256 integers (decimal or 0x-hex, separated by whitespace or commas)."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().replace(",", " ").split()
    try:
        values = [int(tok, 16) if tok.lower().startswith("0x") else int(tok) for tok in tokens]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return as_permutation(values)
