"""The generic matrix Bloom filter.

A 2-tuple ``(x1, x2)`` is hashed to ``k1`` rows by the row family and to
``k2`` columns by the column family; insertion sets the ``k1*k2``
intersection bits and a query reports positive only if all of them are
set.  Rows and columns are therefore each ordinary Bloom filters over
one component, which is what makes batch queries on a fixed component
cheap (see :mod:`mbf.batch`).
"""

from __future__ import annotations

import math
import struct
import threading
from dataclasses import dataclass

import numpy as np

from .bitmatrix import DEFAULT_BUDGET_BITS, BitMatrix
from .errors import FrozenFilterError, InvalidParameterError, SnapshotError
from .hashing import Component, UniversalHashFamily, canonical, canonical_many, derive_seed

LN2 = math.log(2)


@dataclass(frozen=True)
class MatrixBloomParams:
    """Geometry and workload expectations of a matrix filter.

    ``k1_real``/``k2_real`` keep the unrounded hash counts when a planner
    had to round; ``warnings`` collects planner notes such as a hash
    count floored at 1.
    """

    m1: int
    m2: int
    k1: int
    k2: int
    n: int
    n1: int | None = None
    n2: int | None = None
    k1_real: float | None = None
    k2_real: float | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise InvalidParameterError(f"m1, m2 must be >= 1, got {self.m1}, {self.m2}")
        if self.k1 < 1 or self.k2 < 1:
            raise InvalidParameterError(f"k1, k2 must be >= 1, got {self.k1}, {self.k2}")
        if self.n < 0:
            raise InvalidParameterError(f"n must be >= 0, got {self.n}")
        if self.n1 is not None and self.n2 is not None:
            if not max(self.n1, self.n2) <= self.n <= self.n1 * self.n2:
                raise InvalidParameterError(
                    f"need max(n1, n2) <= n <= n1*n2, got n={self.n}, n1={self.n1}, n2={self.n2}"
                )

    @property
    def m(self) -> int:
        return self.m1 * self.m2

    @property
    def k(self) -> int:
        return self.k1 * self.k2


def balanced_split(k_total: int) -> tuple[int, int]:
    """Most balanced factor pair ``(k1, k2)`` of ``k_total`` with ``k1 <= k2``."""
    if k_total < 1:
        raise InvalidParameterError(f"k_total must be >= 1, got {k_total}")
    k1 = max(d for d in range(1, math.isqrt(k_total) + 1) if k_total % d == 0)
    return k1, k_total // k1


def optimal_k(m_total: float, n: float) -> float:
    """Hash count minimising the false positive rate, ``(m/n) ln 2``."""
    if m_total < 1 or n < 1:
        raise InvalidParameterError("m_total and n must be >= 1")
    return m_total / n * LN2


def plan_generic(n: int, k_total: int, split: tuple[int, int] | None = None) -> MatrixBloomParams:
    """Size a matrix filter for ``n`` tuples at the optimum for ``k1*k2 = k_total``.

    The bit budget ``k_total * n / ln 2`` is shared so that ``m1 : m2``
    follows ``k1 : k2`` (square when the split is balanced); each side is
    rounded up.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if k_total < 1:
        raise InvalidParameterError(f"k_total must be >= 1, got {k_total}")
    if split is None:
        k1, k2 = balanced_split(k_total)
    else:
        k1, k2 = split
        if k1 < 1 or k2 < 1 or k1 * k2 != k_total:
            raise InvalidParameterError(f"split {split} does not factor k_total={k_total}")
    m_total = k_total * n / LN2
    m1 = max(1, math.ceil(math.sqrt(m_total * k1 / k2)))
    m2 = max(1, math.ceil(math.sqrt(m_total * k2 / k1)))
    return MatrixBloomParams(m1=m1, m2=m2, k1=k1, k2=k2, n=n)


def theoretical_fpr(params: MatrixBloomParams, n_actual: int | None = None) -> float:
    """``(1 - exp(-n k1 k2 / (m1 m2)))^(k1 k2)`` for ``n_actual`` inserted tuples."""
    n = params.n if n_actual is None else n_actual
    if n < 0:
        raise InvalidParameterError(f"n_actual must be >= 0, got {n}")
    if n == 0:
        return 0.0
    k = params.k
    return (-math.expm1(-n * k / params.m)) ** k


class InstrumentationCounters:
    """Operation counters; increments are serialised so concurrent readers keep exact totals."""

    FIELDS = ("row_hash_invocations", "col_hash_invocations", "partition_invocations", "bit_comparisons", "bucket_comparisons")

    def __init__(self):
        self._lock = threading.Lock()
        self.reset()

    def reset(self) -> None:
        with self._lock:
            for name in self.FIELDS:
                setattr(self, name, 0)

    def add(self, **deltas: int) -> None:
        with self._lock:
            for name, delta in deltas.items():
                setattr(self, name, getattr(self, name) + int(delta))

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return {name: getattr(self, name) for name in self.FIELDS}

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.snapshot().items())
        return f"InstrumentationCounters({inner})"


_FILTER_MAGIC = b"MBFP"
_FILTER_HEADER = struct.Struct(">4sIIQQQQQ")


def _probe_counts(bits: np.ndarray, short_circuit: bool) -> tuple[np.ndarray, np.ndarray]:
    """Verdicts and comparisons for ``(N, k)`` probe results in scan order."""
    positive = bits.all(axis=1)
    if not short_circuit:
        return positive, np.full(len(bits), bits.shape[1], dtype=np.int64)
    first_zero = np.argmin(bits, axis=1) + 1
    return positive, np.where(positive, bits.shape[1], first_zero)


class MatrixBloomFilter:
    """Bit matrix plus row and column hash families.

    ``short_circuit`` stops a query at the first zero bit (rows outer,
    columns inner); with it off every query inspects all ``k1*k2`` bits,
    which changes only the comparison counts.
    """

    def __init__(
        self,
        params: MatrixBloomParams,
        seed: int = 0,
        *,
        row_seed: int | None = None,
        col_seed: int | None = None,
        row_hashes=None,
        short_circuit: bool = True,
        budget_bits: int = DEFAULT_BUDGET_BITS,
    ):
        self.params = params
        self.matrix = BitMatrix(params.m1, params.m2, budget_bits)
        self.row_seed = derive_seed(seed, 1) if row_seed is None else row_seed
        self.col_seed = derive_seed(seed, 2) if col_seed is None else col_seed
        if row_hashes is None:
            row_hashes = UniversalHashFamily(params.k1, params.m1, self.row_seed, distinct=True)
        elif row_hashes.count != params.k1 or row_hashes.range != params.m1:
            raise InvalidParameterError("row hash family does not match k1 x m1")
        self.row_hashes = row_hashes
        self.col_hashes = UniversalHashFamily(params.k2, params.m2, self.col_seed, distinct=True)
        self.short_circuit = short_circuit
        self.inserted = 0
        self.metrics = InstrumentationCounters()
        self._frozen = False

    def __repr__(self):
        p = self.params
        return f"MatrixBloomFilter({p.m1}x{p.m2}, k1={p.k1}, k2={p.k2}, inserted={self.inserted})"

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        """End the insertion phase; afterwards the filter is safe for concurrent queries."""
        self._frozen = True
        self.matrix.freeze()

    def _check_mutable(self) -> None:
        if self._frozen:
            raise FrozenFilterError("filter is frozen")

    def row_indices(self, x1: Component) -> list[int]:
        self.metrics.add(row_hash_invocations=self.params.k1)
        return self.row_hashes.indices(x1)

    def col_indices(self, x2: Component) -> list[int]:
        self.metrics.add(col_hash_invocations=self.params.k2)
        return self.col_hashes.indices(x2)

    def rows_many(self, x1s) -> np.ndarray:
        rows = self.row_hashes.indices_many(x1s)
        self.metrics.add(row_hash_invocations=len(rows) * self.params.k1)
        return rows

    def cols_many(self, x2s) -> np.ndarray:
        cols = self.col_hashes.indices_many(x2s)
        self.metrics.add(col_hash_invocations=len(cols) * self.params.k2)
        return cols

    def _indices_many(self, x1s, x2s) -> tuple[np.ndarray, np.ndarray]:
        if len(x1s) != len(x2s):
            raise InvalidParameterError("x1s and x2s differ in length")
        return self.rows_many(x1s), self.cols_many(x2s)

    def probe_many(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`probe` over ``(N, k1)`` rows and ``(N, k2)`` columns."""
        bits = self.matrix.test_many(rows[:, :, None], cols[:, None, :]).reshape(len(rows), -1)
        positive, comparisons = _probe_counts(bits, self.short_circuit)
        self.metrics.add(bit_comparisons=int(comparisons.sum()))
        return positive

    def probe(self, rows: list[int], cols: list[int]) -> bool:
        """Check the intersection bits of precomputed indices, counting comparisons."""
        test = self.matrix.test
        done = 0
        positive = True
        try:
            for r in rows:
                for c in cols:
                    done += 1
                    if not test(r, c):
                        positive = False
                        if self.short_circuit:
                            return False
            return positive
        finally:
            self.metrics.add(bit_comparisons=done)

    def insert(self, x1: Component, x2: Component) -> None:
        self._check_mutable()
        rows = self.row_indices(x1)
        cols = self.col_indices(x2)
        for r in rows:
            for c in cols:
                self.matrix.set(r, c)
        self.inserted += 1

    def query(self, x1: Component, x2: Component) -> bool:
        return self.probe(self.row_indices(x1), self.col_indices(x2))

    def __contains__(self, pair) -> bool:
        return self.query(*pair)

    def insert_many(self, x1s, x2s) -> None:
        """Vectorised insertion of aligned component sequences."""
        self._check_mutable()
        rows, cols = self._indices_many(x1s, x2s)
        n = len(rows)
        r = np.repeat(rows, self.params.k2, axis=1)
        c = np.tile(cols, (1, self.params.k1))
        self.matrix.set_many(r, c)
        self.inserted += n

    def insert_product(self, x1s, x2s) -> None:
        """Insert the full cross product of two component sets.

        Each distinct component is hashed once; the bits set are exactly
        those of inserting every pair, namely union(rows) x union(columns).
        """
        self._check_mutable()
        rows = np.unique(self.rows_many(x1s))
        cols = np.unique(self.cols_many(x2s))
        r, c = np.meshgrid(rows, cols, indexing="ij")
        self.matrix.set_many(r, c)
        self.inserted += len(x1s) * len(x2s)

    def query_many(self, x1s, x2s) -> np.ndarray:
        """Vectorised query; comparison counts match the scalar path exactly."""
        rows, cols = self._indices_many(x1s, x2s)
        return self.probe_many(rows, cols)

    def load_factor(self) -> float:
        return self.matrix.load_factor()

    def theoretical_fpr(self, n_actual: int | None = None) -> float:
        return theoretical_fpr(self.params, self.inserted if n_actual is None else n_actual)

    def to_bytes(self) -> bytes:
        """Parameter header followed by the bit matrix snapshot.

        Header (big-endian): magic b"MBFP", k1 and k2 as uint32, then n1,
        n2, n, row seed and column seed as uint64 (unknown n1/n2 stored as 0).
        """
        if not isinstance(self.row_hashes, UniversalHashFamily):
            raise SnapshotError("only filters with hashed rows can be serialised")
        p = self.params
        header = _FILTER_HEADER.pack(
            _FILTER_MAGIC, p.k1, p.k2, p.n1 or 0, p.n2 or 0, p.n, self.row_seed, self.col_seed
        )
        return header + self.matrix.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MatrixBloomFilter":
        if len(data) < _FILTER_HEADER.size:
            raise SnapshotError("snapshot shorter than its header")
        magic, k1, k2, n1, n2, n, row_seed, col_seed = _FILTER_HEADER.unpack_from(data)
        if magic != _FILTER_MAGIC:
            raise SnapshotError(f"bad magic {magic!r}")
        matrix = BitMatrix.from_bytes(data[_FILTER_HEADER.size :])
        params = MatrixBloomParams(matrix.m1, matrix.m2, k1, k2, n, n1 or None, n2 or None)
        f = cls(params, row_seed=row_seed, col_seed=col_seed)
        f.matrix = matrix
        return f


def mb_insert(f: MatrixBloomFilter, x1: Component, x2: Component) -> None:
    f.insert(x1, x2)


def mb_query(f: MatrixBloomFilter, x1: Component, x2: Component) -> bool:
    return f.query(x1, x2)


_ROW_TOKEN = b"\x01"


def pair_key(x1: Component, x2: Component) -> bytes:
    """Unambiguous byte string of a whole tuple, for filters that hash it as one item."""
    return canonical(x1) + canonical(x2)


def pair_keys_many(x1s, x2s) -> np.ndarray:
    a = canonical_many(x1s)
    b = canonical_many(x2s)
    if len(a) != len(b):
        raise InvalidParameterError("x1s and x2s differ in length")
    if isinstance(x1s, np.ndarray) and x1s.dtype.kind in "iu":
        return np.hstack([a, b])
    # Variable-width encodings must be concatenated per item, not per column.
    return canonical_many([pair_key(p, q) for p, q in zip(x1s, x2s)])


class StandardBloomFilter:
    """Classic ``(m, k)`` Bloom filter realised as a ``1 x m`` matrix filter."""

    def __init__(self, m: int, k: int, seed: int = 0, *, n: int = 0, short_circuit: bool = True):
        params = MatrixBloomParams(m1=1, m2=m, k1=1, k2=k, n=n)
        self.inner = MatrixBloomFilter(params, seed, short_circuit=short_circuit)

    @classmethod
    def optimal(cls, n: int, k: int, seed: int = 0) -> "StandardBloomFilter":
        return cls(max(1, round(k * n / LN2)), k, seed, n=n)

    @property
    def m(self) -> int:
        return self.inner.params.m2

    @property
    def k(self) -> int:
        return self.inner.params.k2

    @property
    def metrics(self) -> InstrumentationCounters:
        return self.inner.metrics

    @property
    def inserted(self) -> int:
        return self.inner.inserted

    def add(self, item: Component) -> None:
        self.inner.insert(_ROW_TOKEN, item)

    def __contains__(self, item: Component) -> bool:
        return self.inner.query(_ROW_TOKEN, item)

    def add_many(self, items) -> None:
        items = items if isinstance(items, np.ndarray) else canonical_many(items)
        self.inner.insert_many(np.zeros(len(items), dtype=np.uint64), items)

    def contains_many(self, items) -> np.ndarray:
        items = items if isinstance(items, np.ndarray) else canonical_many(items)
        return self.inner.query_many(np.zeros(len(items), dtype=np.uint64), items)

    def add_pairs(self, x1s, x2s) -> None:
        self.add_many(pair_keys_many(x1s, x2s))

    def contains_pairs(self, x1s, x2s) -> np.ndarray:
        return self.contains_many(pair_keys_many(x1s, x2s))

    def load_factor(self) -> float:
        return self.inner.load_factor()

    def theoretical_fpr(self, n_actual: int | None = None) -> float:
        n = self.inserted if n_actual is None else n_actual
        return 0.0 if n == 0 else (-math.expm1(-n * self.k / self.m)) ** self.k
