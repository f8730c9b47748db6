"""Monte Carlo harness for truncated inner c-differentials.

Each trial draws a random block x and a nonzero random difference a_rand,
projects a_rand onto the input mask to get a (skipping the trial if that is
zero), encrypts x and c*x ^ a, and tallies the pair (a, masked output diff).

Orientation. Cipher states keep byte 0 leftmost (RFC layout). Experiment
indices count from the other end: nibble k is bits [4k, 4k+4) of the block
read as a big-endian 128-bit integer, so "byte_k" is nibbles {2k, 2k+1} and
sits at state index 15 - k. byte_8 is the "00000000000000XX0000000000000000"
position.

Randomness. Trials are grouped into work units of 1024. Unit u draws from a
Philox generator keyed by splitmix64(seed ^ u), and always draws the full unit
before truncating, so any trial range gives the same trials no matter how it
is split between workers or batches.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cipher import encrypt_blocks, key_schedule, master_key_from_hex
from .gf256 import MUL

UNIT_SIZE = 1024
UNITS_PER_CHUNK = 64
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


# ---------------------------------------------------------------- masks

def nibble_position(k: int) -> tuple[int, int]:
    """Return (state byte index, bit mask within that byte) for nibble k."""
    if not 0 <= k < 32:
        raise ValueError(f"nibble index must be in [0, 31], got {k}")
    return 15 - k // 2, (0x0F if k % 2 == 0 else 0xF0)


def nibble_byte_mask(nibbles) -> np.ndarray:
    """16-byte AND-mask that keeps exactly the given nibbles."""
    mask = np.zeros(16, dtype=np.uint8)
    for k in nibbles:
        pos, bits = nibble_position(k)
        mask[pos] |= bits
    return mask


@dataclass(frozen=True)
class MaskConfig:
    name: str
    input_nibbles: frozenset
    output_nibbles: frozenset

    def __post_init__(self):
        object.__setattr__(self, "input_nibbles", frozenset(int(k) for k in self.input_nibbles))
        object.__setattr__(self, "output_nibbles", frozenset(int(k) for k in self.output_nibbles))
        if not self.input_nibbles:
            raise ValueError(f"mask {self.name!r}: input nibble set is empty, every trial would be skipped")
        for k in self.input_nibbles | self.output_nibbles:
            nibble_position(k)

    @property
    def k_in(self) -> int:
        return len(self.input_nibbles)

    @property
    def k_out(self) -> int:
        return len(self.output_nibbles)

    @property
    def in_mask(self) -> np.ndarray:
        return nibble_byte_mask(self.input_nibbles)

    @property
    def out_mask(self) -> np.ndarray:
        return nibble_byte_mask(self.output_nibbles)

    def input_state_bytes(self) -> list[int]:
        return sorted({15 - k // 2 for k in self.input_nibbles})

    def output_state_bytes(self) -> list[int]:
        return sorted({15 - k // 2 for k in self.output_nibbles})

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_nibbles": sorted(self.input_nibbles),
            "output_nibbles": sorted(self.output_nibbles),
        }


def byte_mask(k_in: int, k_out: int) -> MaskConfig:
    return MaskConfig(f"byte_{k_in}_in->byte_{k_out}_out", {2 * k_in, 2 * k_in + 1}, {2 * k_out, 2 * k_out + 1})


def default_masks() -> list[MaskConfig]:
    same = [byte_mask(k, k) for k in range(0, 16, 2)]
    cross = [byte_mask(k, k + 1) for k in (0, 2, 4, 14)]
    return same + cross


_BYTE_NAME = re.compile(r"^byte_(\d+)(?:_in)?(?:->byte_(\d+)(?:_out)?)?$")


def parse_mask(text: str) -> MaskConfig:
    """Accept "byte_8", "byte_0->byte_1", "byte_8_in->byte_8_out" or "in=16,17;out=16,17"."""
    s = text.strip()
    m = _BYTE_NAME.match(s)
    if m:
        k_in = int(m.group(1))
        k_out = int(m.group(2)) if m.group(2) is not None else k_in
        if k_in > 15 or k_out > 15:
            raise ValueError(f"byte index out of range in mask {text!r}")
        return byte_mask(k_in, k_out)
    parts = {}
    for chunk in s.split(";"):
        key, sep, val = chunk.partition("=")
        if not sep or key.strip() not in ("in", "out"):
            raise ValueError(f"cannot parse mask {text!r}; expected a byte_k name or 'in=..;out=..'")
        try:
            parts[key.strip()] = [int(v) for v in val.split(",") if v.strip()]
        except ValueError:
            raise ValueError(f"non-integer nibble index in mask {text!r}") from None
    if set(parts) != {"in", "out"}:
        raise ValueError(f"mask {text!r} needs both 'in=' and 'out=' parts")
    name = "in_{}->out_{}".format("_".join(map(str, sorted(parts["in"]))), "_".join(map(str, sorted(parts["out"]))))
    return MaskConfig(name, parts["in"], parts["out"])


def project(s: bytes, nibbles) -> bytes:
    """Zero every nibble not in the index set."""
    arr = np.frombuffer(bytes(s), dtype=np.uint8)
    return (arr & nibble_byte_mask(nibbles)).tobytes()


def pattern_match(delta: bytes, active_bytes) -> bool:
    """True iff delta is nonzero at every active byte (experiment byte numbering)."""
    return all(delta[15 - k] != 0 for k in active_bytes)


def multiply_state(c_vector: bytes, x: bytes) -> bytes:
    return bytes(int(MUL[c, v]) for c, v in zip(c_vector, x))


def build_c_vector(c: int, masks: MaskConfig | None = None, scope: str = "all") -> bytes:
    """Broadcast scalar c to all 16 bytes, or (scope="active") only to the active input bytes."""
    if not 0 <= c <= 255:
        raise ValueError(f"c must be a byte, got {c}")
    if scope == "all":
        return bytes([c] * 16)
    if scope == "active":
        if masks is None:
            raise ValueError("scope 'active' needs a mask")
        vec = bytearray([1] * 16)
        for pos in masks.input_state_bytes():
            vec[pos] = c
        return bytes(vec)
    raise ValueError(f"c scope must be 'all' or 'active', got {scope!r}")


def derive_master_key(seed: int) -> bytes:
    """Deterministic experiment key: run the key schedule on a splitmix-expanded block."""
    words, state = [], seed & _MASK64
    for _ in range(4):
        state = splitmix64(state)
        words.append(state)
    block = b"".join(w.to_bytes(8, "big") for w in words)
    rk = key_schedule(block)
    return rk.keys[8] + rk.keys[9]


# ---------------------------------------------------------------- config / results

@dataclass(frozen=True)
class ExperimentConfig:
    rounds: int
    c_vector: bytes
    masks: MaskConfig
    trials: int
    seed: int
    master_key: bytes
    c: int | None = None

    def __post_init__(self):
        if not 1 <= self.rounds <= 9:
            raise ValueError(f"rounds must be in [1, 9], got {self.rounds}")
        if len(self.c_vector) != 16:
            raise ValueError("c_vector must be 16 bytes")
        if len(self.master_key) != 32:
            raise ValueError("master key must be 32 bytes")
        if self.trials <= 0:
            raise ValueError("trials must be positive")

    @classmethod
    def from_scalar(cls, rounds, c, masks, trials, seed, master_key=None, scope="all"):
        key = derive_master_key(seed) if master_key is None else master_key
        return cls(rounds, build_c_vector(c, masks, scope), masks, trials, seed, key, c)

    @property
    def c_label(self) -> str:
        if self.c is not None:
            return f"0x{self.c:02x}"
        return "0x" + self.c_vector.hex()

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "c": self.c_label,
            "c_vector": self.c_vector.hex(),
            "mask": self.masks.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "master_key": self.master_key.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        m = d["mask"]
        c = d.get("c")
        c_int = int(c, 16) if c is not None and len(c) == 4 else None
        return cls(
            rounds=int(d["rounds"]),
            c_vector=bytes.fromhex(d["c_vector"]),
            masks=MaskConfig(m["name"], m["input_nibbles"], m["output_nibbles"]),
            trials=int(d["trials"]),
            seed=int(d["seed"]),
            master_key=master_key_from_hex(d["master_key"]),
            c=c_int,
        )


def _void(rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows)
    return rows.view(np.dtype((np.void, rows.shape[1]))).ravel()


def _canonical(a: np.ndarray, b: np.ndarray, counts: np.ndarray):
    """Sum duplicate (a, b) keys and sort lexicographically by a then b."""
    if len(counts) == 0:
        return np.zeros((0, 16), np.uint8), np.zeros((0, 16), np.uint8), np.zeros(0, np.int64)
    rows = np.concatenate([a, b], axis=1)
    _, first, inv = np.unique(_void(rows), return_index=True, return_inverse=True)
    summed = np.bincount(inv.ravel(), weights=counts, minlength=len(first)).astype(np.int64)
    keep = rows[first]
    return keep[:, :16].copy(), keep[:, 16:].copy(), summed


@dataclass
class FrequencyMap:
    """Observed (a, b) pair counts stored as parallel arrays sorted by (a, b)."""

    a: np.ndarray = field(default_factory=lambda: np.zeros((0, 16), np.uint8))
    b: np.ndarray = field(default_factory=lambda: np.zeros((0, 16), np.uint8))
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    trials_used: int = 0
    trials_skipped: int = 0
    pattern_matches: int = 0

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, key) -> int:
        a, b = key
        rows = np.concatenate([self.a, self.b], axis=1)
        target = np.frombuffer(bytes(a) + bytes(b), dtype=np.uint8)
        hit = np.nonzero((rows == target).all(axis=1))[0]
        return int(self.counts[hit[0]]) if len(hit) else 0

    def items(self):
        for i in range(len(self.counts)):
            yield (self.a[i].tobytes(), self.b[i].tobytes()), int(self.counts[i])

    def as_dict(self) -> dict:
        return dict(self.items())

    @property
    def total_trials(self) -> int:
        return self.trials_used + self.trials_skipped

    def __eq__(self, other):
        if not isinstance(other, FrequencyMap):
            return NotImplemented
        return (
            np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.counts, other.counts)
            and (self.trials_used, self.trials_skipped, self.pattern_matches)
            == (other.trials_used, other.trials_skipped, other.pattern_matches)
        )

    def to_csv_lines(self) -> list[str]:
        return [f"{a.hex()},{b.hex()},{n}" for (a, b), n in self.items()]

    def to_json(self) -> dict:
        return {
            "trials_used": self.trials_used,
            "trials_skipped": self.trials_skipped,
            "pattern_matches": self.pattern_matches,
            "a": [row.tobytes().hex() for row in self.a],
            "b": [row.tobytes().hex() for row in self.b],
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "FrequencyMap":
        def rows(hexes):
            if not hexes:
                return np.zeros((0, 16), np.uint8)
            return np.frombuffer(bytes.fromhex("".join(hexes)), dtype=np.uint8).reshape(-1, 16).copy()

        a, b, counts = _canonical(rows(d["a"]), rows(d["b"]), np.asarray(d["counts"], dtype=np.int64))
        return cls(a, b, counts, int(d["trials_used"]), int(d["trials_skipped"]), int(d.get("pattern_matches", 0)))


def merge(maps) -> FrequencyMap:
    maps = list(maps)
    if not maps:
        return FrequencyMap()
    a, b, counts = _canonical(
        np.concatenate([m.a for m in maps]),
        np.concatenate([m.b for m in maps]),
        np.concatenate([m.counts for m in maps]),
    )
    return FrequencyMap(
        a, b, counts,
        sum(m.trials_used for m in maps),
        sum(m.trials_skipped for m in maps),
        sum(m.pattern_matches for m in maps),
    )


# ---------------------------------------------------------------- sampling

def unit_draws(seed: int, unit: int) -> tuple[np.ndarray, np.ndarray]:
    """Plaintexts x and nonzero raw differences a_rand for one 1024-trial unit."""
    key = splitmix64((seed ^ unit) & _MASK64)
    rng = np.random.Generator(np.random.Philox(key=key))
    x = rng.integers(0, 256, size=(UNIT_SIZE, 16), dtype=np.uint8)
    a = rng.integers(0, 256, size=(UNIT_SIZE, 16), dtype=np.uint8)
    zero = ~a.any(axis=1)
    while zero.any():
        a[zero] = rng.integers(0, 256, size=(int(zero.sum()), 16), dtype=np.uint8)
        zero = ~a.any(axis=1)
    return x, a


class _Tally:
    """Counts keyed by the active bytes only; packed into uint64 when they fit."""

    def __init__(self, masks: MaskConfig):
        self.in_pos = masks.input_state_bytes()
        self.out_pos = masks.output_state_bytes()
        self.width = len(self.in_pos) + len(self.out_pos)
        self.packed = self.width <= 8
        self.parts = []

    def add(self, a: np.ndarray, b: np.ndarray):
        cols = np.concatenate([a[:, self.in_pos], b[:, self.out_pos]], axis=1)
        if self.packed:
            code = np.zeros(len(cols), dtype=np.uint64)
            for j in range(self.width):
                code = (code << np.uint64(8)) | cols[:, j].astype(np.uint64)
            keys, counts = np.unique(code, return_counts=True)
            self.parts.append((keys, counts.astype(np.int64)))
        else:
            keys, first, counts = np.unique(_void(cols), return_index=True, return_counts=True)
            self.parts.append((cols[first], counts.astype(np.int64)))
        if len(self.parts) > 8:
            self._compact()

    def _compact(self):
        keys = np.concatenate([k for k, _ in self.parts])
        counts = np.concatenate([c for _, c in self.parts])
        if self.packed:
            uk, inv = np.unique(keys, return_inverse=True)
        else:
            _, first, inv = np.unique(_void(keys), return_index=True, return_inverse=True)
            uk = keys[first]
        self.parts = [(uk, np.bincount(inv.ravel(), weights=counts, minlength=len(uk)).astype(np.int64))]

    def frequency_map(self, used: int, skipped: int, matches: int) -> FrequencyMap:
        if self.parts:
            self._compact()
            keys, counts = self.parts[0]
        else:
            keys, counts = np.zeros(0, np.uint64), np.zeros(0, np.int64)
        if self.packed:
            cols = np.zeros((len(keys), self.width), dtype=np.uint8)
            for j in range(self.width - 1, -1, -1):
                cols[:, j] = (keys & np.uint64(0xFF)).astype(np.uint8)
                keys = keys >> np.uint64(8)
        else:
            cols = keys.reshape(-1, self.width) if len(keys) else np.zeros((0, self.width), np.uint8)
        a = np.zeros((len(cols), 16), np.uint8)
        b = np.zeros((len(cols), 16), np.uint8)
        a[:, self.in_pos] = cols[:, : len(self.in_pos)]
        b[:, self.out_pos] = cols[:, len(self.in_pos):]
        fa, fb, fc = _canonical(a, b, counts)
        return FrequencyMap(fa, fb, fc, used, skipped, matches)


def _run_range(cfg: ExperimentConfig, lo: int, hi: int) -> FrequencyMap:
    """Process global trial indices [lo, hi) in-process."""
    rk = key_schedule(cfg.master_key).array
    in_mask, out_mask = cfg.masks.in_mask, cfg.masks.out_mask
    cvec = np.frombuffer(cfg.c_vector, dtype=np.uint8)
    out_active = cfg.masks.output_state_bytes()
    tally = _Tally(cfg.masks)
    used = skipped = matches = 0

    first_unit, last_unit = lo // UNIT_SIZE, (hi - 1) // UNIT_SIZE
    for chunk_start in range(first_unit, last_unit + 1, UNITS_PER_CHUNK):
        xs, deltas = [], []
        for u in range(chunk_start, min(chunk_start + UNITS_PER_CHUNK, last_unit + 1)):
            x, a_rand = unit_draws(cfg.seed, u)
            s = max(lo - u * UNIT_SIZE, 0)
            e = min(hi - u * UNIT_SIZE, UNIT_SIZE)
            xs.append(x[s:e])
            deltas.append(a_rand[s:e])
        x = np.concatenate(xs)
        a = np.concatenate(deltas) & in_mask
        live = a.any(axis=1)
        skipped += int(len(live) - live.sum())
        x, a = x[live], a[live]
        used += len(x)
        x2 = MUL[cvec[None, :], x] ^ a
        ct = encrypt_blocks(np.concatenate([x, x2]), rk, cfg.rounds)
        n = len(x)
        b = (ct[:n] ^ ct[n:]) & out_mask
        matches += int(b[:, out_active].all(axis=1).sum()) if out_active else n
        tally.add(a, b)
    return tally.frequency_map(used, skipped, matches)


def default_workers() -> int:
    env = os.environ.get("KUZCDIFF_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"KUZCDIFF_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _split(lo: int, hi: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous ranges whose boundaries fall on work-unit edges where possible."""
    units = -(-(hi - lo) // UNIT_SIZE)
    per = -(-units // workers)
    bounds = []
    for w in range(workers):
        s = lo + w * per * UNIT_SIZE
        e = min(lo + (w + 1) * per * UNIT_SIZE, hi)
        if s < e:
            bounds.append((s, e))
    return bounds


def run_trials(cfg: ExperimentConfig, workers: int | None = None, start: int = 0) -> FrequencyMap:
    """Run trials start .. start + cfg.trials - 1 and return the merged frequency map."""
    if cfg.trials <= 0:
        raise ValueError("trials must be positive")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    ranges = _split(start, start + cfg.trials, workers)
    if len(ranges) == 1:
        return _run_range(cfg, *ranges[0])
    with ProcessPoolExecutor(max_workers=len(ranges)) as pool:
        parts = list(pool.map(_run_range, [cfg] * len(ranges), [r[0] for r in ranges], [r[1] for r in ranges]))
    return merge(parts)


def config_json(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)
