"""Multi-set membership with one filter per set (vBF) or one matrix filter.

The vBF keeps ``v`` standard filters and answers "which set holds e?" by
asking every one of them.  The general index stores ``(set id, element)``
tuples in a single matrix filter and answers both that question and
"which candidates belong to set s?" with batch queries.  Bloom
structures cannot enumerate, so both questions take an explicit
candidate list.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .batch import FIXED_FIRST, FIXED_SECOND, BatchRequest, batch_query
from .core import LN2, MatrixBloomFilter, MatrixBloomParams, plan_generic
from .errors import InvalidParameterError
from .hashing import Component, DirectIndex, derive_seed


def optimal_bits(n: int, k: int) -> int:
    return max(1, math.ceil(k * max(n, 1) / LN2))


class VBF:
    """``v`` standard filters with a shared hash count and column seed.

    Filter ``i`` has ``sizes[i]`` bits.  Sharing the column seed means a
    vBF whose filters all have the same length is bit-for-bit the matrix
    filter returned by :meth:`matrix_equivalent`.
    """

    def __init__(self, sizes: Sequence[int], k: int, seed: int = 0):
        if len(sizes) < 1:
            raise InvalidParameterError("a vBF needs at least one set")
        if k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {k}")
        self.v = len(sizes)
        self.k = int(k)
        self.seed = seed
        self.col_seed = derive_seed(seed, 2)
        self.filters = [
            MatrixBloomFilter(MatrixBloomParams(1, int(m), 1, self.k, 0), row_seed=0, col_seed=self.col_seed)
            for m in sizes
        ]
        self.queries = 0

    @classmethod
    def for_sets(cls, set_sizes: Sequence[int], k: int, seed: int = 0) -> "VBF":
        """Each filter at its own optimum ``m_i = k n_i / ln 2``."""
        return cls([optimal_bits(n, k) for n in set_sizes], k, seed)

    @property
    def sizes(self) -> list[int]:
        return [f.params.m2 for f in self.filters]

    @property
    def bits(self) -> int:
        return sum(self.sizes)

    def _check(self, set_id: int) -> None:
        if not 0 <= set_id < self.v:
            raise InvalidParameterError(f"set id {set_id} outside [0, {self.v})")

    def insert(self, set_id: int, element: Component) -> None:
        self._check(set_id)
        self.filters[set_id].insert(0, element)

    def insert_many(self, set_ids, elements) -> None:
        set_ids = np.asarray(set_ids)
        for s in np.unique(set_ids).tolist():
            self._check(s)
            idx = np.flatnonzero(set_ids == s)
            self.filters[s].insert_many(np.zeros(len(idx), dtype=np.uint64), _take(elements, idx))

    def contains(self, set_id: int, element: Component) -> bool:
        self._check(set_id)
        self.queries += 1
        return self.filters[set_id].query(0, element)

    def which_sets(self, element: Component) -> list[int]:
        """Every set whose filter reports ``element``; costs ``v`` filter queries."""
        return [i for i in range(self.v) if self.contains(i, element)]

    def membership_matrix(self, elements) -> np.ndarray:
        """``(v, N)`` verdicts of every filter on every element."""
        zeros = np.zeros(len(elements), dtype=np.uint64)
        self.queries += self.v * len(elements)
        return np.stack([f.query_many(zeros, elements) for f in self.filters])

    def theoretical_fpr(self, set_id: int) -> float:
        return self.filters[set_id].theoretical_fpr()

    def matrix_equivalent(self) -> MatrixBloomFilter:
        """The same structure as one ``v x m`` matrix filter with direct row addressing."""
        sizes = set(self.sizes)
        if len(sizes) != 1:
            raise InvalidParameterError("matrix equivalence needs filters of equal length")
        m = sizes.pop()
        f = MatrixBloomFilter(
            MatrixBloomParams(self.v, m, 1, self.k, sum(x.inserted for x in self.filters)),
            row_seed=0, col_seed=self.col_seed, row_hashes=DirectIndex(self.v),
        )
        for i, sub in enumerate(self.filters):
            f.matrix._words[i] = sub.matrix._words[0]
        f.matrix.ones = f.matrix.popcount()
        f.inserted = sum(x.inserted for x in self.filters)
        return f


def _take(items, idx):
    if isinstance(items, np.ndarray):
        return items[idx]
    return [items[i] for i in idx]


def vbf_insert(v: VBF, set_id: int, element: Component) -> None:
    v.insert(set_id, element)


def vbf_which_sets(v: VBF, element: Component) -> list[int]:
    return v.which_sets(element)


class GeneralMultisetIndex:
    """Matrix filter over ``(set id, element)`` tuples."""

    def __init__(self, params: MatrixBloomParams, seed: int = 0):
        self.filter = MatrixBloomFilter(params, seed)

    @classmethod
    def plan(cls, n_tuples: int, k_total: int, seed: int = 0,
             split: tuple[int, int] | None = None) -> "GeneralMultisetIndex":
        return cls(plan_generic(n_tuples, k_total, split), seed)

    def insert(self, set_id: Component, element: Component) -> None:
        self.filter.insert(set_id, element)

    def insert_many(self, set_ids, elements) -> None:
        self.filter.insert_many(set_ids, elements)

    def theoretical_fpr(self) -> float:
        return self.filter.theoretical_fpr()


def gmi_which_sets(g: GeneralMultisetIndex, element: Component, candidate_set_ids: Sequence[Component]) -> list:
    """Candidates ``s`` for which ``(s, element)`` tests positive."""
    res = batch_query(g.filter, BatchRequest(FIXED_SECOND, element, list(candidate_set_ids)))
    return [s for s, hit in zip(candidate_set_ids, res.verdicts) if hit]


def gmi_members_of_set(g: GeneralMultisetIndex, set_id: Component, candidate_elements: Sequence[Component]) -> list:
    """Candidates ``e`` for which ``(set_id, e)`` tests positive."""
    res = batch_query(g.filter, BatchRequest(FIXED_FIRST, set_id, list(candidate_elements)))
    return [e for e, hit in zip(candidate_elements, res.verdicts) if hit]


def vbf_planned_bits(num_possible_sets: int, per_set_capacity: int, k: int) -> int:
    """A vBF must pre-allocate one equal filter for every possible set id."""
    return num_possible_sets * optimal_bits(per_set_capacity, k)


def gmi_planned_bits(n_elements: int, used_sets: int, k_total: int) -> int:
    """The matrix index is sized by the tuples it holds, ``max(|B|, n1)``."""
    return plan_generic(max(n_elements, used_sets), k_total).m


def _avoid(m: int, w: int, k: int) -> float:
    """Probability that a uniform ``k``-subset of ``[0, m)`` misses ``w`` given points."""
    return math.comb(m - w, k) / math.comb(m, k)


def gmi_false_inclusion_theory(m1: int, m2: int, k1: int, k2: int, num_sets: int, set_size: int) -> float:
    """Expected false-inclusion rate of the matrix index on disjoint equal sets.

    ``num_sets`` sets of ``set_size`` distinct elements are stored.  The
    rate is that of a query ``(s', e)`` with ``e`` in another set ``s``,
    under ideal hashing (each row and column index set a uniform subset).
    Set ids repeat ``set_size`` times, so the independent-bit formula
    does not apply; instead cell ``(r, c)`` is set iff some set hits row
    ``r`` and holds an element hitting column ``c``, and inclusion-exclusion
    over the ``k1*k2`` queried cells gives

        sum over S of (-1)^|S| * P(s' misses S) * P(s misses S) * P(t misses S)^(v-2)

    where ``s'`` misses S when none of its elements hits a column of S,
    ``s`` (which holds e) when none of its rows is a row of S, and any
    other set ``t`` when no cell of S lies in rows(t) x columns(t).
    """
    if num_sets < 2:
        raise InvalidParameterError("false inclusion needs at least two sets")
    if k1 > m1 or k2 > m2:
        raise InvalidParameterError("hash count exceeds axis length")
    E = set_size
    cells = [(r, c) for r in range(k1) for c in range(k2)]
    total = 0.0
    for mask in range(1 << len(cells)):
        S = [cell for i, cell in enumerate(cells) if mask >> i & 1]
        rows = sorted({r for r, _ in S})
        h = len(rows)
        p_query_set = _avoid(m2, len({c for _, c in S}), k2) ** E
        p_true_set = _avoid(m1, h, k1)
        p_other = 0.0
        for a in range(min(h, k1) + 1):
            for hit in itertools.combinations(rows, a):
                w = len({c for r, c in S if r in hit})
                p_other += math.comb(m1 - h, k1 - a) / math.comb(m1, k1) * _avoid(m2, w, k2) ** E
        total += (-1) ** len(S) * p_query_set * p_true_set * p_other ** (num_sets - 2)
    return total


def vbf_false_inclusion_theory(m: int, k: int, set_size: int) -> float:
    """Same quantity for one vBF filter: all ``k`` columns covered by ``set_size`` elements."""
    return sum((-1) ** w * math.comb(k, w) * _avoid(m, w, k) ** set_size for w in range(k + 1))
