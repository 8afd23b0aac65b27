"""Packed ``m1 x m2`` bit grid.

Storage is row-major, one run of 64-bit words per row; column ``c`` of a
row lives in word ``c // 64`` at bit ``c % 64`` (least significant first).

Binary snapshot layout (all integers big-endian)::

    offset  size  field
    0       4     magic b"MBF1"
    4       4     m1 (uint32)
    8       4     m2 (uint32)
    12      4     reserved, zero
    16      ...   ceil(m1*m2 / 8) bytes: bit r*m2 + c, most significant
                  bit of each byte first, final byte zero padded

The set-bit count is not stored; it is recomputed on load.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CapacityError, FrozenFilterError, InvalidParameterError, SnapshotError

DEFAULT_BUDGET_BITS = 256 * 2**20 * 8
SNAPSHOT_MAGIC = b"MBF1"
_HEADER = struct.Struct(">4sIII")


class BitMatrix:
    def __init__(self, m1: int, m2: int, budget_bits: int = DEFAULT_BUDGET_BITS):
        if m1 < 1 or m2 < 1:
            raise InvalidParameterError(f"matrix dimensions must be >= 1, got {m1}x{m2}")
        if m1 * m2 > budget_bits:
            raise CapacityError(f"{m1}x{m2} = {m1 * m2} bits exceeds budget of {budget_bits} bits")
        self.m1 = int(m1)
        self.m2 = int(m2)
        self._words = np.zeros((self.m1, (self.m2 + 63) // 64), dtype=np.uint64)
        self.ones = 0

    @property
    def size(self) -> int:
        return self.m1 * self.m2

    @property
    def frozen(self) -> bool:
        return not self._words.flags.writeable

    def __repr__(self):
        return f"BitMatrix({self.m1}x{self.m2}, ones={self.ones})"

    def _check(self, r: int, c: int) -> None:
        if not (0 <= r < self.m1 and 0 <= c < self.m2):
            raise InvalidParameterError(f"cell ({r}, {c}) outside {self.m1}x{self.m2}")

    def set(self, r: int, c: int) -> bool:
        """Set bit ``(r, c)``; returns True if it was previously 0."""
        self._check(r, c)
        if self.frozen:
            raise FrozenFilterError("bit matrix is frozen")
        mask = np.uint64(1 << (c & 63))
        word = self._words[r, c >> 6]
        if word & mask:
            return False
        self._words[r, c >> 6] = word | mask
        self.ones += 1
        return True

    def test(self, r: int, c: int) -> bool:
        self._check(r, c)
        return bool((int(self._words[r, c >> 6]) >> (c & 63)) & 1)

    def _check_many(self, rows: np.ndarray, cols: np.ndarray) -> None:
        if rows.size and (rows.min() < 0 or rows.max() >= self.m1 or cols.min() < 0 or cols.max() >= self.m2):
            raise InvalidParameterError(f"cell indices outside {self.m1}x{self.m2}")

    def set_many(self, rows, cols) -> int:
        """Vectorised :meth:`set`; returns how many bits flipped from 0 to 1."""
        if self.frozen:
            raise FrozenFilterError("bit matrix is frozen")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        self._check_many(rows, cols)
        flat = np.unique(rows * self.m2 + cols)
        r, c = np.divmod(flat, self.m2)
        fresh = ~self._test_unchecked(r, c)
        r, c = r[fresh], c[fresh]
        masks = np.left_shift(np.uint64(1), (c & 63).astype(np.uint64))
        np.bitwise_or.at(self._words, (r, c >> 6), masks)
        changed = int(fresh.sum())
        self.ones += changed
        return changed

    def _test_unchecked(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        words = self._words[rows, cols >> 6]
        return ((words >> (cols & 63).astype(np.uint64)) & np.uint64(1)).astype(bool)

    def test_many(self, rows, cols) -> np.ndarray:
        """Vectorised :meth:`test` over broadcastable index arrays."""
        rows, cols = np.broadcast_arrays(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))
        self._check_many(rows, cols)
        return self._test_unchecked(rows, cols)

    def load_factor(self) -> float:
        return self.ones / self.size

    def popcount(self, row_start: int = 0, row_stop: int | None = None) -> int:
        """Set bits counted directly from storage, optionally over a row band."""
        return int(np.bitwise_count(self._words[row_start:row_stop]).sum())

    def freeze(self) -> None:
        self._words.flags.writeable = False

    def to_bool(self) -> np.ndarray:
        """Dense ``(m1, m2)`` boolean copy."""
        as_bytes = self._words.astype("<u8").view(np.uint8)
        return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, : self.m2].astype(bool)

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(SNAPSHOT_MAGIC, self.m1, self.m2, 0)
        return header + np.packbits(self.to_bool().ravel()).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, budget_bits: int = DEFAULT_BUDGET_BITS) -> "BitMatrix":
        if len(data) < _HEADER.size:
            raise SnapshotError("snapshot shorter than its header")
        magic, m1, m2, _ = _HEADER.unpack_from(data)
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotError(f"bad magic {magic!r}")
        nbytes = (m1 * m2 + 7) // 8
        body = data[_HEADER.size : _HEADER.size + nbytes]
        if len(body) != nbytes:
            raise SnapshotError(f"expected {nbytes} payload bytes, got {len(body)}")
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[: m1 * m2].astype(bool).reshape(m1, m2)
        matrix = cls(m1, m2, budget_bits)
        r, c = np.nonzero(bits)
        matrix.set_many(r, c)
        return matrix

    def snapshot_size(self) -> int:
        return _HEADER.size + (self.size + 7) // 8

    def __eq__(self, other):
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.m1 == other.m1 and self.m2 == other.m2 and np.array_equal(self._words, other._words)


def bm_new(m1: int, m2: int, budget_bits: int = DEFAULT_BUDGET_BITS) -> BitMatrix:
    return BitMatrix(m1, m2, budget_bits)


def bm_set(m: BitMatrix, r: int, c: int) -> bool:
    return m.set(r, c)


def bm_test(m: BitMatrix, r: int, c: int) -> bool:
    return m.test(r, c)


def bm_load_factor(m: BitMatrix) -> float:
    return m.load_factor()
