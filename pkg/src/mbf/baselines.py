"""Exact hashmap baselines with comparison counting.

Both tables chain ``(key, value)`` pairs in buckets chosen by the
multiplicative hash of the key.  A lookup compares the probe pair
against chain nodes in insertion order.  It costs the number of nodes
inspected, and a probe of an empty bucket still costs one comparison.
"""

from __future__ import annotations

from typing import Hashable, Iterable

from .hashing import multiplicative_bucket
from .errors import InvalidParameterError


class ChainedHashTable:
    def __init__(self, length: int):
        if length < 1:
            raise InvalidParameterError(f"hash table length must be >= 1, got {length}")
        self.length = int(length)
        self.buckets: list[list[tuple]] = [[] for _ in range(self.length)]
        self.size = 0
        self.comparisons = 0
        self.queries = 0
        self.insert_comparisons = 0

    @classmethod
    def for_pairs(cls, pairs: Iterable[tuple], length: int | None = None, multiplier: float = 1.0) -> "ChainedHashTable":
        """Table holding ``pairs`` with ``multiplier`` x (distinct keys) buckets unless ``length`` is given."""
        pairs = list(pairs)
        if length is None:
            length = max(1, round(multiplier * len({k for k, _ in pairs})))
        table = cls(length)
        for key, value in pairs:
            table.insert(key, value)
        return table

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"ChainedHashTable(length={self.length}, size={self.size})"

    def bucket_of(self, key: Hashable) -> int:
        return multiplicative_bucket(key, self.length)

    def _scan(self, chain: list[tuple], pair: tuple) -> tuple[bool, int]:
        if not chain:
            return False, 1
        try:
            return True, chain.index(pair) + 1
        except ValueError:
            return False, len(chain)

    def insert(self, key, value) -> bool:
        """Append the pair unless already stored; returns whether it was added."""
        chain = self.buckets[self.bucket_of(key)]
        found, cost = self._scan(chain, (key, value))
        self.insert_comparisons += cost
        if found:
            return False
        chain.append((key, value))
        self.size += 1
        return True

    def query(self, key, value) -> tuple[bool, int]:
        """``(found, comparisons)`` for one lookup; also accumulated on the table."""
        found, cost = self._scan(self.buckets[self.bucket_of(key)], (key, value))
        self.comparisons += cost
        self.queries += 1
        return found, cost

    def __contains__(self, pair) -> bool:
        chain = self.buckets[self.bucket_of(pair[0])]
        return tuple(pair) in chain

    def average_comparisons(self) -> float:
        return self.comparisons / self.queries if self.queries else 0.0

    def reset_counters(self) -> None:
        self.comparisons = self.queries = self.insert_comparisons = 0

    def chain_lengths(self) -> list[int]:
        return [len(c) for c in self.buckets]

    def node_count(self) -> int:
        return sum(len(c) for c in self.buckets)


class DoubleHashTable:
    """A forward table keyed by key and a backward table of commuted ``(value, key)`` pairs."""

    def __init__(self, forward_length: int, backward_length: int | None = None):
        self.forward = ChainedHashTable(forward_length)
        self.backward = ChainedHashTable(forward_length if backward_length is None else backward_length)

    @classmethod
    def for_pairs(cls, pairs: Iterable[tuple], multiplier: float = 1.0) -> "DoubleHashTable":
        """Each side gets ``multiplier`` x its own distinct key count in buckets."""
        pairs = list(pairs)
        n_keys = len({k for k, _ in pairs})
        n_values = len({v for _, v in pairs})
        table = cls(max(1, round(multiplier * n_keys)), max(1, round(multiplier * n_values)))
        for key, value in pairs:
            table.insert(key, value)
        return table

    def __len__(self):
        return self.forward.size

    def insert(self, key, value) -> bool:
        added = self.forward.insert(key, value)
        if added:
            self.backward.insert(value, key)
        return added

    def query_by_key(self, key, value) -> tuple[bool, int]:
        return self.forward.query(key, value)

    def query_by_value(self, value, key) -> tuple[bool, int]:
        return self.backward.query(value, key)

    def node_count(self) -> int:
        return self.forward.node_count() + self.backward.node_count()


def hm_insert(t: ChainedHashTable, key, value) -> bool:
    return t.insert(key, value)


def hm_query(t: ChainedHashTable, key, value) -> tuple[bool, int]:
    return t.query(key, value)


def dhm_query_by_key(t: DoubleHashTable, key, value) -> tuple[bool, int]:
    return t.query_by_key(key, value)


def dhm_query_by_value(t: DoubleHashTable, value, key) -> tuple[bool, int]:
    return t.query_by_value(value, key)
