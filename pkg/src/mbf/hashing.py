"""Seeded hash families.

Filters use the H3 universal family: every bit position ``b`` of the
item's canonical byte string owns a random 64-bit coefficient ``d[i][b]``
for hash function ``i``, and

    h_i(x) = XOR over b of (d[i][b] AND x_b)        (x_b in {0, 1})

reduced modulo the output range.  Because the map is linear over GF(2),
it is evaluated one byte at a time from 256-entry lookup tables, which
is what makes the vectorised ``indices_many`` path cheap.

Coefficients come from NumPy's PCG64 generator.  For function ``i`` and
byte position ``p`` the eight coefficients of that byte are the first
eight raw 64-bit outputs of ``PCG64(SeedSequence(seed, spawn_key=(i, p)))``,
bit 0 being the most significant bit of the byte.  Any port that
implements SeedSequence and PCG64 reproduces the indices exactly.

Baselines use a single multiplicative hash (Knuth's golden-ratio
multiplier), see :func:`multiplicative_bucket`.
"""

from __future__ import annotations

import threading
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidParameterError

MASK64 = (1 << 64) - 1
GOLDEN_MULTIPLIER = 0x9E3779B97F4A7C15

Component = Union[int, str, bytes, bytearray, memoryview]

_INITIAL_WIDTH = 16  # bytes of coefficient tables built eagerly


def canonical(x: Component) -> bytes:
    """Serialise a tuple component to its hashing byte string.

    Integers become 8 bytes big-endian (two's complement for negatives),
    text becomes a 4-byte big-endian length followed by UTF-8, and raw
    bytes pass through untouched.
    """
    if isinstance(x, (bytes, bytearray, memoryview)):
        return bytes(x)
    if isinstance(x, str):
        raw = x.encode("utf-8")
        return len(raw).to_bytes(4, "big") + raw
    if isinstance(x, (int, np.integer)):
        return (int(x) & MASK64).to_bytes(8, "big")
    raise TypeError(f"unsupported component type {type(x).__name__}")


def canonical_many(items) -> np.ndarray:
    """Canonical encodings of ``items`` as a zero-padded ``(N, L)`` uint8 array.

    Zero padding is harmless for H3: a zero byte selects no coefficient.
    """
    if isinstance(items, np.ndarray) and items.dtype.kind in "iu":
        be = np.ascontiguousarray(items.astype(np.uint64, copy=False).astype(">u8"))
        return be.view(np.uint8).reshape(len(items), 8)
    items = list(items)
    if items and all(isinstance(x, (int, np.integer)) and not isinstance(x, bool) for x in items):
        try:
            return canonical_many(np.array(items, dtype=np.uint64))
        except OverflowError:
            pass
    encoded = [canonical(x) for x in items]
    width = max((len(e) for e in encoded), default=0)
    out = np.zeros((len(encoded), max(width, 1)), dtype=np.uint8)
    for row, e in enumerate(encoded):
        out[row, : len(e)] = np.frombuffer(e, dtype=np.uint8)
    return out


def derive_seed(seed: int, *tags: int) -> int:
    """Independent 64-bit child seed of ``seed`` labelled by ``tags``."""
    ss = np.random.SeedSequence(seed & MASK64, spawn_key=tuple(tags))
    return int(ss.generate_state(1, np.uint64)[0])


def _byte_coefficients(seed: int, i: int, p: int) -> np.ndarray:
    bitgen = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i, p)))
    return bitgen.random_raw(8).astype(np.uint64)


_BYTE_VALUES = np.arange(256, dtype=np.uint16)


def _byte_table(coeffs: np.ndarray) -> np.ndarray:
    table = np.zeros(256, dtype=np.uint64)
    for b in range(8):
        selected = ((_BYTE_VALUES >> (7 - b)) & 1).astype(bool)
        table[selected] ^= coeffs[b]
    return table


class UniversalHashFamily:
    """``count`` independent H3 hash functions onto ``[0, range)``.

    With ``distinct=True`` the index *sets* returned by :meth:`indices`
    and :meth:`indices_many` contain no repeats: an index equal to an
    earlier one of the same item is advanced by linear probing (only when
    ``count <= range``).  :meth:`index` always returns the raw function.

    Immutable from the caller's point of view; coefficient tables for
    long items are extended lazily under a lock.
    """

    def __init__(self, count: int, range: int, seed: int, distinct: bool = False):
        if count < 1:
            raise InvalidParameterError(f"hash count must be >= 1, got {count}")
        if range < 1:
            raise InvalidParameterError(f"hash range must be >= 1, got {range}")
        self.count = int(count)
        self.range = int(range)
        self.seed = int(seed) & MASK64
        self.distinct = distinct and self.count <= self.range
        self._lock = threading.Lock()
        self._tables = np.zeros((self.count, 0, 256), dtype=np.uint64)
        self._ensure_width(_INITIAL_WIDTH)

    def __repr__(self):
        return f"UniversalHashFamily(count={self.count}, range={self.range}, seed={self.seed})"

    def _ensure_width(self, width: int) -> np.ndarray:
        tables = self._tables
        if tables.shape[1] >= width:
            return tables
        with self._lock:
            tables = self._tables
            if tables.shape[1] < width:
                extra = np.stack(
                    [
                        np.stack([_byte_table(_byte_coefficients(self.seed, i, p)) for p in range(tables.shape[1], width)])
                        for i in range(self.count)
                    ]
                )
                self._tables = tables = np.concatenate([tables, extra], axis=1)
        return tables

    def coefficients(self, i: int, nbytes: int = 8) -> np.ndarray:
        """The per-bit coefficients ``d[i][0 .. 8*nbytes)`` of function ``i``."""
        self._check_index(i)
        return np.concatenate([_byte_coefficients(self.seed, i, p) for p in range(nbytes)])

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.count:
            raise InvalidParameterError(f"hash function index {i} outside [0, {self.count})")

    def raw(self, i: int, item: Component) -> int:
        """Unreduced 64-bit H3 value of ``item`` under function ``i``."""
        self._check_index(i)
        data = canonical(item)
        if not data:
            raise InvalidParameterError("cannot hash an empty item")
        tables = self._ensure_width(len(data))
        acc = 0
        for p, byte in enumerate(data):
            acc ^= int(tables[i, p, byte])
        return acc

    def index(self, i: int, item: Component) -> int:
        return self.raw(i, item) % self.range

    def indices(self, item: Component) -> list[int]:
        """All ``count`` indices of one item, in function order."""
        data = canonical(item)
        if not data:
            raise InvalidParameterError("cannot hash an empty item")
        tables = self._ensure_width(len(data))
        acc = np.zeros(self.count, dtype=np.uint64)
        for p, byte in enumerate(data):
            acc ^= tables[:, p, byte]
        out = (acc % np.uint64(self.range)).astype(np.int64)
        if self.distinct:
            out = self._spread(out[None, :])[0]
        return out.tolist()

    def indices_many(self, items) -> np.ndarray:
        """Indices for a batch of items as an ``(N, count)`` int64 array."""
        encoded = items if isinstance(items, np.ndarray) and items.dtype == np.uint8 and items.ndim == 2 else canonical_many(items)
        n, width = encoded.shape
        tables = self._ensure_width(width)
        acc = np.zeros((self.count, n), dtype=np.uint64)
        for p in range(width):
            acc ^= tables[:, p, :][:, encoded[:, p]]
        out = (acc % np.uint64(self.range)).astype(np.int64).T
        return self._spread(out) if self.distinct else out

    def _spread(self, idx: np.ndarray) -> np.ndarray:
        idx = np.array(idx, copy=True)
        for j in range(1, self.count):
            clash = (idx[:, :j] == idx[:, j : j + 1]).any(axis=1)
            while clash.any():
                idx[clash, j] = (idx[clash, j] + 1) % self.range
                clash = (idx[:, :j] == idx[:, j : j + 1]).any(axis=1)
        return idx


def make_universal_family(count: int, range: int, seed: int, distinct: bool = False) -> UniversalHashFamily:
    if count < 1:
        raise InvalidParameterError(f"hash count must be >= 1, got {count}")
    if range < 2:
        raise InvalidParameterError(f"hash range must be >= 2, got {range}")
    return UniversalHashFamily(count, range, seed, distinct)


def hash_index(family: UniversalHashFamily, i: int, item: Component) -> int:
    return family.index(i, item)


class DirectIndex:
    """Degenerate one-function "family" mapping a non-negative integer to itself.

    Lets a matrix filter address rows by pre-assigned ids, which is how a
    vBF sits inside the matrix structure.
    """

    count = 1

    def __init__(self, range: int):
        self.range = int(range)

    def _value(self, item) -> int:
        if isinstance(item, (bytes, bytearray, memoryview)):
            item = int.from_bytes(item, "big")
        item = int(item)
        if not 0 <= item < self.range:
            raise InvalidParameterError(f"direct index {item} outside [0, {self.range})")
        return item

    def index(self, i: int, item) -> int:
        if i != 0:
            raise InvalidParameterError("direct index has a single function")
        return self._value(item)

    def indices(self, item) -> list[int]:
        return [self._value(item)]

    def indices_many(self, items) -> np.ndarray:
        values = np.asarray([self._value(x) for x in items], dtype=np.int64)
        return values.reshape(-1, 1)


class PartitionHash:
    """Assigns items to one of ``j`` classes (the j-matrix square selector)."""

    def __init__(self, j: int, seed: int):
        if j < 1:
            raise InvalidParameterError(f"partition count must be >= 1, got {j}")
        self.j = int(j)
        self.seed = int(seed) & MASK64
        self._family = UniversalHashFamily(1, self.j, self.seed) if self.j > 1 else None

    def __call__(self, item: Component) -> int:
        if self._family is None:
            return 0
        return self._family.index(0, item)

    def classify_many(self, items) -> np.ndarray:
        if self._family is None:
            return np.zeros(len(items), dtype=np.int64)
        return self._family.indices_many(items)[:, 0]


def partition(p: PartitionHash, item: Component) -> int:
    return p(item)


def fold64(key: Component) -> int:
    """Reduce a component to a 64-bit integer key for the baseline hash."""
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    data = canonical(key)
    acc = 0
    for start in range(0, len(data), 8):
        acc ^= int.from_bytes(data[start : start + 8].ljust(8, b"\0"), "big")
    return acc


def multiplicative_bucket(key: Component, buckets: int) -> int:
    """Knuth multiplicative hashing onto ``[0, buckets)``.

    Takes the high bits of the 64-bit product via ``(frac * buckets) >> 64``
    so non-power-of-two bucket counts stay balanced.
    """
    if buckets < 1:
        raise InvalidParameterError(f"bucket count must be >= 1, got {buckets}")
    product = (fold64(key) * GOLDEN_MULTIPLIER) & MASK64
    return (product * buckets) >> 64


def multiplicative_buckets(keys: Sequence[int] | Iterable[int], buckets: int) -> list[int]:
    return [multiplicative_bucket(k, buckets) for k in keys]
