"""Kuznyechik (GOST R 34.12-2015, RFC 7801) with reduced-round support.

A state is a 16-byte ``bytes`` object. Byte 0 is the leftmost byte of the
32-character hex rendering, which is the layout the RFC 7801 vectors use.

The scalar helpers (``r_transform``, ``linear_l_composed``...) are written for
clarity and serve as oracles. The hot path is ``encrypt_blocks`` /
``decrypt_blocks``, which operate on ``(n, 16)`` uint8 arrays and evaluate L
with 16 table lookups per block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gf256 import MUL, gf_mul

BLOCK_SIZE = 16
KEY_SIZE = 32
MAX_ROUNDS = 9

SBOX = (
    0xFC, 0xEE, 0xDD, 0x11, 0xCF, 0x6E, 0x31, 0x16, 0xFB, 0xC4, 0xFA, 0xDA, 0x23, 0xC5, 0x04, 0x4D,
    0xE9, 0x77, 0xF0, 0xDB, 0x93, 0x2E, 0x99, 0xBA, 0x17, 0x36, 0xF1, 0xBB, 0x14, 0xCD, 0x5F, 0xC1,
    0xF9, 0x18, 0x65, 0x5A, 0xE2, 0x5C, 0xEF, 0x21, 0x81, 0x1C, 0x3C, 0x42, 0x8B, 0x01, 0x8E, 0x4F,
    0x05, 0x84, 0x02, 0xAE, 0xE3, 0x6A, 0x8F, 0xA0, 0x06, 0x0B, 0xED, 0x98, 0x7F, 0xD4, 0xD3, 0x1F,
    0xEB, 0x34, 0x2C, 0x51, 0xEA, 0xC8, 0x48, 0xAB, 0xF2, 0x2A, 0x68, 0xA2, 0xFD, 0x3A, 0xCE, 0xCC,
    0xB5, 0x70, 0x0E, 0x56, 0x08, 0x0C, 0x76, 0x12, 0xBF, 0x72, 0x13, 0x47, 0x9C, 0xB7, 0x5D, 0x87,
    0x15, 0xA1, 0x96, 0x29, 0x10, 0x7B, 0x9A, 0xC7, 0xF3, 0x91, 0x78, 0x6F, 0x9D, 0x9E, 0xB2, 0xB1,
    0x32, 0x75, 0x19, 0x3D, 0xFF, 0x35, 0x8A, 0x7E, 0x6D, 0x54, 0xC6, 0x80, 0xC3, 0xBD, 0x0D, 0x57,
    0xDF, 0xF5, 0x24, 0xA9, 0x3E, 0xA8, 0x43, 0xC9, 0xD7, 0x79, 0xD6, 0xF6, 0x7C, 0x22, 0xB9, 0x03,
    0xE0, 0x0F, 0xEC, 0xDE, 0x7A, 0x94, 0xB0, 0xBC, 0xDC, 0xE8, 0x28, 0x50, 0x4E, 0x33, 0x0A, 0x4A,
    0xA7, 0x97, 0x60, 0x73, 0x1E, 0x00, 0x62, 0x44, 0x1A, 0xB8, 0x38, 0x82, 0x64, 0x9F, 0x26, 0x41,
    0xAD, 0x45, 0x46, 0x92, 0x27, 0x5E, 0x55, 0x2F, 0x8C, 0xA3, 0xA5, 0x7D, 0x69, 0xD5, 0x95, 0x3B,
    0x07, 0x58, 0xB3, 0x40, 0x86, 0xAC, 0x1D, 0xF7, 0x30, 0x37, 0x6B, 0xE4, 0x88, 0xD9, 0xE7, 0x89,
    0xE1, 0x1B, 0x83, 0x49, 0x4C, 0x3F, 0xF8, 0xFE, 0x8D, 0x53, 0xAA, 0x90, 0xCA, 0xD8, 0x85, 0x61,
    0x20, 0x71, 0x67, 0xA4, 0x2D, 0x2B, 0x09, 0x5B, 0xCB, 0x9B, 0x25, 0xD0, 0xBE, 0xE5, 0x6C, 0x52,
    0x59, 0xA6, 0x74, 0xD2, 0xE6, 0xF4, 0xB4, 0xC0, 0xD1, 0x66, 0xAF, 0xC2, 0x39, 0x4B, 0x63, 0xB6,
)

SBOX_INV = (
    0xA5, 0x2D, 0x32, 0x8F, 0x0E, 0x30, 0x38, 0xC0, 0x54, 0xE6, 0x9E, 0x39, 0x55, 0x7E, 0x52, 0x91,
    0x64, 0x03, 0x57, 0x5A, 0x1C, 0x60, 0x07, 0x18, 0x21, 0x72, 0xA8, 0xD1, 0x29, 0xC6, 0xA4, 0x3F,
    0xE0, 0x27, 0x8D, 0x0C, 0x82, 0xEA, 0xAE, 0xB4, 0x9A, 0x63, 0x49, 0xE5, 0x42, 0xE4, 0x15, 0xB7,
    0xC8, 0x06, 0x70, 0x9D, 0x41, 0x75, 0x19, 0xC9, 0xAA, 0xFC, 0x4D, 0xBF, 0x2A, 0x73, 0x84, 0xD5,
    0xC3, 0xAF, 0x2B, 0x86, 0xA7, 0xB1, 0xB2, 0x5B, 0x46, 0xD3, 0x9F, 0xFD, 0xD4, 0x0F, 0x9C, 0x2F,
    0x9B, 0x43, 0xEF, 0xD9, 0x79, 0xB6, 0x53, 0x7F, 0xC1, 0xF0, 0x23, 0xE7, 0x25, 0x5E, 0xB5, 0x1E,
    0xA2, 0xDF, 0xA6, 0xFE, 0xAC, 0x22, 0xF9, 0xE2, 0x4A, 0xBC, 0x35, 0xCA, 0xEE, 0x78, 0x05, 0x6B,
    0x51, 0xE1, 0x59, 0xA3, 0xF2, 0x71, 0x56, 0x11, 0x6A, 0x89, 0x94, 0x65, 0x8C, 0xBB, 0x77, 0x3C,
    0x7B, 0x28, 0xAB, 0xD2, 0x31, 0xDE, 0xC4, 0x5F, 0xCC, 0xCF, 0x76, 0x2C, 0xB8, 0xD8, 0x2E, 0x36,
    0xDB, 0x69, 0xB3, 0x14, 0x95, 0xBE, 0x62, 0xA1, 0x3B, 0x16, 0x66, 0xE9, 0x5C, 0x6C, 0x6D, 0xAD,
    0x37, 0x61, 0x4B, 0xB9, 0xE3, 0xBA, 0xF1, 0xA0, 0x85, 0x83, 0xDA, 0x47, 0xC5, 0xB0, 0x33, 0xFA,
    0x96, 0x6F, 0x6E, 0xC2, 0xF6, 0x50, 0xFF, 0x5D, 0xA9, 0x8E, 0x17, 0x1B, 0x97, 0x7D, 0xEC, 0x58,
    0xF7, 0x1F, 0xFB, 0x7C, 0x09, 0x0D, 0x7A, 0x67, 0x45, 0x87, 0xDC, 0xE8, 0x4F, 0x1D, 0x4E, 0x04,
    0xEB, 0xF8, 0xF3, 0x3E, 0x3D, 0xBD, 0x8A, 0x88, 0xDD, 0xCD, 0x0B, 0x13, 0x98, 0x02, 0x93, 0x80,
    0x90, 0xD0, 0x24, 0x34, 0xCB, 0xED, 0xF4, 0xCE, 0x99, 0x10, 0x44, 0x40, 0x92, 0x3A, 0x01, 0x26,
    0x12, 0x1A, 0x48, 0x68, 0xF5, 0x81, 0x8B, 0xC7, 0xD6, 0x20, 0x0A, 0x08, 0x00, 0x4C, 0xD7, 0x74,
)

# Feedback coefficients of R, indexed like the state (byte 0 first).
L_COEFFS = (0x94, 0x20, 0x85, 0x10, 0xC2, 0xC0, 0x01, 0xFB, 0x01, 0xC0, 0xC2, 0x10, 0x85, 0x20, 0x94, 0x01)

_SBOX_NP = np.array(SBOX, dtype=np.uint8)
_SBOX_INV_NP = np.array(SBOX_INV, dtype=np.uint8)


def sbox(x: int) -> int:
    return SBOX[x]


def sbox_inv(x: int) -> int:
    return SBOX_INV[x]


# ---------------------------------------------------------------- hex I/O

def _check_len(data: bytes, size: int, what: str) -> bytes:
    if len(data) != size:
        raise ValueError(f"{what} must be {size} bytes, got {len(data)}")
    return bytes(data)


def state_from_hex(text: str) -> bytes:
    """Parse a 32-hex-char block (an optional ``0x`` prefix is accepted)."""
    return _parse_hex(text, BLOCK_SIZE, "block")


def master_key_from_hex(text: str) -> bytes:
    return _parse_hex(text, KEY_SIZE, "master key")


def _parse_hex(text: str, size: int, what: str) -> bytes:
    s = text.strip()
    if s[:2].lower() == "0x":
        s = s[2:]
    if len(s) != 2 * size:
        raise ValueError(f"{what} must be {2 * size} hex characters, got {len(s)}")
    for pos, ch in enumerate(s):
        if ch not in "0123456789abcdefABCDEF":
            raise ValueError(f"invalid hex character {ch!r} at position {pos} of {what}")
    return bytes.fromhex(s)


def state_to_hex(state: bytes, prefix: bool = False) -> str:
    return ("0x" if prefix else "") + bytes(state).hex()


# ---------------------------------------------------------------- linear layer

def r_transform(state: bytes) -> bytes:
    """One step of the LFSR: the feedback byte enters at byte 0, the rest shift right."""
    fb = 0
    for c, a in zip(L_COEFFS, state):
        fb ^= gf_mul(c, a)
    return bytes([fb]) + bytes(state[:15])


def r_inv(state: bytes) -> bytes:
    head = state[1:]
    fb = state[0]
    for c, a in zip(L_COEFFS[:15], head):
        fb ^= gf_mul(c, a)
    return bytes(head) + bytes([fb])


def linear_l_composed(state: bytes) -> bytes:
    """L as 16 applications of R (slow reference path)."""
    for _ in range(16):
        state = r_transform(state)
    return state


def linear_l_inv_composed(state: bytes) -> bytes:
    for _ in range(16):
        state = r_inv(state)
    return state


def build_l_tables() -> tuple[np.ndarray, np.ndarray]:
    """Return ``(L_TABLE, L_INV_TABLE)``, each uint8 of shape (16, 256, 16).

    ``L_TABLE[i][v]`` is L applied to the block holding ``v`` at byte ``i``.
    Only the 16 unit vectors go through the composed R; the remaining rows
    follow from GF(2^8)-linearity: L(v * e_i) = v * L(e_i).
    """
    tables = []
    for compose in (linear_l_composed, linear_l_inv_composed):
        table = np.empty((16, 256, 16), dtype=np.uint8)
        for i in range(16):
            unit = bytearray(16)
            unit[i] = 1
            image = np.frombuffer(compose(bytes(unit)), dtype=np.uint8)
            table[i] = MUL[:, image]
        table.setflags(write=False)
        tables.append(table)
    return tables[0], tables[1]


L_TABLE, L_INV_TABLE = build_l_tables()
# Same tables viewed as two uint64 words per row: XOR of words == XOR of bytes.
_L64 = np.ascontiguousarray(L_TABLE).view(np.uint64)
_L_INV64 = np.ascontiguousarray(L_INV_TABLE).view(np.uint64)


def _apply_table(blocks: np.ndarray, table64: np.ndarray) -> np.ndarray:
    acc = table64[0, blocks[:, 0]]
    for i in range(1, 16):
        acc = acc ^ table64[i, blocks[:, i]]
    return acc.view(np.uint8).reshape(-1, 16)


def linear_l(state: bytes) -> bytes:
    block = np.frombuffer(_check_len(state, 16, "block"), dtype=np.uint8)[None, :]
    return _apply_table(block, _L64).tobytes()


def linear_l_inv(state: bytes) -> bytes:
    block = np.frombuffer(_check_len(state, 16, "block"), dtype=np.uint8)[None, :]
    return _apply_table(block, _L_INV64).tobytes()


def derive_constants() -> tuple[bytes, ...]:
    """Iteration constants C_1..C_32, C_j = L(Vec(j)) with j in the last (least significant) byte."""
    return tuple(linear_l(bytes(15) + bytes([j])) for j in range(1, 33))


CONSTANTS = derive_constants()


# ---------------------------------------------------------------- keys

@dataclass(frozen=True)
class RoundKeys:
    """The ten round keys K^(0)..K^(9)."""

    keys: tuple[bytes, ...]

    def __post_init__(self):
        if len(self.keys) != 10 or any(len(k) != 16 for k in self.keys):
            raise ValueError("RoundKeys needs exactly ten 16-byte keys")

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.frombuffer(b"".join(self.keys), dtype=np.uint8).reshape(10, 16)
        return arr

    def hex(self) -> list[str]:
        return [k.hex() for k in self.keys]


_CONSTANTS_NP = np.frombuffer(b"".join(CONSTANTS), dtype=np.uint8).reshape(32, 16)


def key_schedule_many(master_keys: np.ndarray) -> np.ndarray:
    """Vectorized key schedule: (n, 32) uint8 master keys -> (n, 10, 16) round keys."""
    mk = np.asarray(master_keys, dtype=np.uint8)
    if mk.ndim != 2 or mk.shape[1] != KEY_SIZE:
        raise ValueError(f"master keys must have shape (n, {KEY_SIZE})")
    out = np.empty((mk.shape[0], 10, 16), dtype=np.uint8)
    a1 = mk[:, :16].copy()
    a0 = mk[:, 16:].copy()
    out[:, 0] = a1
    out[:, 1] = a0
    for block in range(4):
        for step in range(8):
            c = _CONSTANTS_NP[8 * block + step]
            a1, a0 = _apply_table(_SBOX_NP[a1 ^ c], _L64) ^ a0, a1
        out[:, 2 * block + 2] = a1
        out[:, 2 * block + 3] = a0
    return out


def key_schedule(master_key: bytes) -> RoundKeys:
    mk = _check_len(master_key, KEY_SIZE, "master key")
    rk = key_schedule_many(np.frombuffer(mk, dtype=np.uint8)[None, :])[0]
    return RoundKeys(tuple(row.tobytes() for row in rk))


# ---------------------------------------------------------------- encryption

def _check_rounds(rounds: int) -> None:
    if not isinstance(rounds, (int, np.integer)) or not 1 <= rounds <= MAX_ROUNDS:
        raise ValueError(f"rounds must be an integer in [1, {MAX_ROUNDS}], got {rounds!r}")


def _key_array(round_keys) -> np.ndarray:
    if isinstance(round_keys, RoundKeys):
        return round_keys.array
    arr = np.asarray(round_keys, dtype=np.uint8)
    if arr.shape[-2:] != (10, 16):
        raise ValueError("round keys must have trailing shape (10, 16)")
    return arr


def encrypt_blocks(blocks: np.ndarray, round_keys, rounds: int = MAX_ROUNDS) -> np.ndarray:
    """Encrypt an (n, 16) uint8 array.

    ``round_keys`` is a RoundKeys, a (10, 16) array shared by all blocks, or an
    (n, 10, 16) array with one key set per block. Each round is X, S, L; the
    key K^(rounds) is XORed at the end, so rounds=9 is the full cipher.
    """
    _check_rounds(rounds)
    rk = _key_array(round_keys)
    per_block = rk.ndim == 3
    x = np.asarray(blocks, dtype=np.uint8).reshape(-1, 16)
    for i in range(rounds):
        k = rk[:, i] if per_block else rk[i]
        x = _apply_table(_SBOX_NP[x ^ k], _L64)
    return x ^ (rk[:, rounds] if per_block else rk[rounds])


def decrypt_blocks(blocks: np.ndarray, round_keys, rounds: int = MAX_ROUNDS) -> np.ndarray:
    _check_rounds(rounds)
    rk = _key_array(round_keys)
    per_block = rk.ndim == 3
    x = np.asarray(blocks, dtype=np.uint8).reshape(-1, 16)
    x = x ^ (rk[:, rounds] if per_block else rk[rounds])
    for i in range(rounds - 1, -1, -1):
        x = _SBOX_INV_NP[_apply_table(x, _L_INV64)]
        x = x ^ (rk[:, i] if per_block else rk[i])
    return x


def encrypt(block: bytes, round_keys: RoundKeys, rounds: int = MAX_ROUNDS) -> bytes:
    arr = np.frombuffer(_check_len(block, 16, "block"), dtype=np.uint8)
    return encrypt_blocks(arr, round_keys, rounds)[0].tobytes()


def decrypt(block: bytes, round_keys: RoundKeys, rounds: int = MAX_ROUNDS) -> bytes:
    arr = np.frombuffer(_check_len(block, 16, "block"), dtype=np.uint8)
    return decrypt_blocks(arr, round_keys, rounds)[0].tobytes()


def s_layer(state: bytes) -> bytes:
    return bytes(SBOX[b] for b in state)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))
