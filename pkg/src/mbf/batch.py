"""Batch partial existence tests and double-side queries.

A batch fixes one component and varies the other.  The fixed side is
hashed once for the whole batch and its indices are reused for every
item, so a batch of ``t`` items with a fixed first component costs
``k1 + t*k2`` hash evaluations instead of ``t*(k1 + k2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MatrixBloomFilter
from .errors import InvalidParameterError
from .hashing import Component

FIXED_FIRST = "fixed-first"
FIXED_SECOND = "fixed-second"
FIRST_THEN_SECOND = "first-then-second"
SECOND_THEN_FIRST = "second-then-first"


@dataclass(frozen=True)
class BatchRequest:
    side: str
    fixed: Component
    varying: Sequence[Component]

    def __post_init__(self):
        if self.side not in (FIXED_FIRST, FIXED_SECOND):
            raise InvalidParameterError(f"side must be {FIXED_FIRST!r} or {FIXED_SECOND!r}, got {self.side!r}")
        if len(self.varying) == 0:
            raise InvalidParameterError("batch has no varying items")


@dataclass(frozen=True)
class BatchResult:
    verdicts: list[bool]
    row_invocations: int
    col_invocations: int

    @property
    def hash_invocations(self) -> tuple[int, int]:
        return self.row_invocations, self.col_invocations

    def __len__(self):
        return len(self.verdicts)


def batch_query(f: MatrixBloomFilter, req: BatchRequest) -> BatchResult:
    """Query ``(fixed, v)`` or ``(v, fixed)`` for every varying ``v``.

    Works for any :class:`MatrixBloomFilter`, j-matrix included (for a
    fixed first component the partition hash then runs once).  Verdicts
    and comparison counts equal those of one-by-one queries.
    """
    k1, k2 = f.params.k1, f.params.k2
    t = len(req.varying)
    if req.side == FIXED_FIRST:
        rows = np.asarray(f.row_indices(req.fixed), dtype=np.int64)
        cols = f.cols_many(req.varying)
        verdicts = f.probe_many(np.broadcast_to(rows, (t, k1)), cols)
        used = (k1, t * k2)
    else:
        cols = np.asarray(f.col_indices(req.fixed), dtype=np.int64)
        rows = f.rows_many(req.varying)
        verdicts = f.probe_many(rows, np.broadcast_to(cols, (t, k2)))
        used = (t * k1, k2)
    return BatchResult([bool(v) for v in verdicts], *used)


def batch_insert(f: MatrixBloomFilter, side: str, fixed: Component, varying: Sequence[Component]) -> None:
    """Insert a batch sharing one component, hashing the shared side once."""
    req = BatchRequest(side, fixed, varying)
    f._check_mutable()
    t = len(req.varying)
    if side == FIXED_FIRST:
        rows = np.broadcast_to(np.asarray(f.row_indices(fixed), dtype=np.int64), (t, f.params.k1))
        cols = f.cols_many(req.varying)
    else:
        cols = np.broadcast_to(np.asarray(f.col_indices(fixed), dtype=np.int64), (t, f.params.k2))
        rows = f.rows_many(req.varying)
    r = np.repeat(rows, f.params.k2, axis=1)
    c = np.tile(cols, (1, f.params.k1))
    f.matrix.set_many(r, c)
    f.inserted += t


def double_side_query(f: MatrixBloomFilter, x1: Component, x2: Component, order: str = FIRST_THEN_SECOND) -> bool:
    """Membership of ``(x1, x2)`` evaluating the components in ``order``.

    The verdict never depends on ``order``; only which hash family runs
    first (and so the counter attribution at any instant) does.
    """
    if order == FIRST_THEN_SECOND:
        rows = f.row_indices(x1)
        cols = f.col_indices(x2)
    elif order == SECOND_THEN_FIRST:
        cols = f.col_indices(x2)
        rows = f.row_indices(x1)
    else:
        raise InvalidParameterError(f"unknown query order {order!r}")
    return f.probe(rows, cols)
