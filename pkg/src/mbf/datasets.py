"""Workload generation and UCI Bag-of-Words ingestion.

Generated scalars are seeded 64-bit random integers.  Pair collections
are held as two aligned ``uint64`` arrays (:class:`Pairs`), which is the
form the vectorised filter paths consume directly.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import logging
import os
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, NamedTuple

import numpy as np

from .errors import DatasetMissingError, DocwordParseError, InvalidParameterError

log = logging.getLogger(__name__)

UCI_BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases/bag-of-words/"
DOCWORD_FILES = {"kos": "docword.kos.txt.gz", "nips": "docword.nips.txt.gz"}


class TuplePair(NamedTuple):
    x1: int
    x2: int


@dataclass
class Pairs:
    """Aligned component arrays; ``meta`` records how they were made."""

    x1: np.ndarray
    x2: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=np.uint64)
        self.x2 = np.asarray(self.x2, dtype=np.uint64)
        if self.x1.shape != self.x2.shape or self.x1.ndim != 1:
            raise InvalidParameterError("x1 and x2 must be 1-D arrays of equal length")

    def __len__(self):
        return len(self.x1)

    def __iter__(self) -> Iterator[TuplePair]:
        for a, b in zip(self.x1.tolist(), self.x2.tolist()):
            yield TuplePair(a, b)

    def __getitem__(self, i) -> TuplePair:
        return TuplePair(int(self.x1[i]), int(self.x2[i]))

    def distinct_first(self) -> int:
        return len(np.unique(self.x1))

    def distinct_second(self) -> int:
        return len(np.unique(self.x2))

    def pair_set(self) -> set[tuple[int, int]]:
        return set(zip(self.x1.tolist(), self.x2.tolist()))

    def take(self, idx) -> "Pairs":
        return Pairs(self.x1[idx], self.x2[idx], dict(self.meta))


def distinct_scalars(rng: np.random.Generator, n: int, exclude: set[int] | None = None) -> np.ndarray:
    """``n`` distinct random uint64 values in draw order, avoiding ``exclude``."""
    out: list[int] = []
    seen = set() if exclude is None else set(exclude)
    while len(out) < n:
        for v in rng.integers(0, 2**64, size=n - len(out), dtype=np.uint64).tolist():
            if v not in seen:
                seen.add(v)
                out.append(v)
    return np.array(out, dtype=np.uint64)


def gen_full_repeating(n1: int, n2: int, seed: int) -> Pairs:
    """Full cross product of ``n1`` random first and ``n2`` random second components."""
    if n1 < 1 or n2 < 1:
        raise InvalidParameterError(f"n1, n2 must be >= 1, got {n1}, {n2}")
    rng = np.random.default_rng(seed)
    a = distinct_scalars(rng, n1)
    b = distinct_scalars(rng, n2)
    return Pairs(np.repeat(a, n2), np.tile(b, n1), {"generator": "full-repeating", "n1": n1, "n2": n2, "seed": seed})


def gen_no_repeating(n: int, seed: int) -> Pairs:
    """``n`` pairs forming a bijection between two random scalar sets."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return Pairs(distinct_scalars(rng, n), distinct_scalars(rng, n), {"generator": "no-repeating", "n": n, "seed": seed})


@dataclass
class DocwordResult:
    pairs: Pairs
    docs: int
    words: int
    nnz_header: int
    declared_docs: int
    declared_words: int
    warnings: list[str] = field(default_factory=list)


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if not path.exists():
            raise DatasetMissingError(f"{path} not found; run `mbf fetch-data` to download it")
        if path.suffix == ".gz":
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="ascii"), True
        return open(path, encoding="ascii"), True
    if isinstance(source, io.BufferedIOBase) or hasattr(source, "mode") and "b" in getattr(source, "mode", ""):
        return io.TextIOWrapper(source, encoding="ascii"), False
    return source, False


def _header_value(stream, lineno: int, name: str) -> int:
    line = stream.readline()
    if not line:
        raise DocwordParseError(f"missing {name} header", lineno)
    try:
        value = int(line.strip())
    except ValueError:
        raise DocwordParseError(f"{name} header is not an integer: {line.strip()!r}", lineno) from None
    if value < 0:
        raise DocwordParseError(f"negative {name} header", lineno)
    return value


def parse_docword(source) -> DocwordResult:
    """Parse a docword file (path, ``.gz`` path or text/binary stream).

    Yields one ``(docID, wordID)`` pair per data line; the count column is
    ignored.  A line count different from the NNZ header is recorded in
    ``warnings`` rather than raised.
    """
    stream, owned = _open_text(source)
    try:
        d = _header_value(stream, 1, "D")
        w = _header_value(stream, 2, "W")
        nnz = _header_value(stream, 3, "NNZ")
        docs = np.empty(nnz, dtype=np.uint64)
        words = np.empty(nnz, dtype=np.uint64)
        count = 0
        for lineno, line in enumerate(stream, start=4):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise DocwordParseError(f"expected 'docID wordID count', got {line.strip()!r}", lineno)
            try:
                doc, word, _ = (int(p) for p in parts)
            except ValueError:
                raise DocwordParseError(f"non-integer field in {line.strip()!r}", lineno) from None
            if doc < 1 or word < 1:
                raise DocwordParseError("ids must be positive", lineno)
            if count == len(docs):
                docs = np.resize(docs, max(16, 2 * count))
                words = np.resize(words, max(16, 2 * count))
            docs[count] = doc
            words[count] = word
            count += 1
    finally:
        if owned:
            stream.close()
    warnings = []
    if count != nnz:
        warnings.append(f"NNZ header says {nnz} but {count} data lines were read")
        log.warning(warnings[-1])
    pairs = Pairs(docs[:count], words[:count], {"generator": "docword"})
    return DocwordResult(pairs, pairs.distinct_first(), pairs.distinct_second(), nnz, d, w, warnings)


@dataclass
class LookupSet:
    section_one: Pairs
    section_two: Pairs
    proportion: float

    def __len__(self):
        return len(self.section_one) + len(self.section_two)

    def combined(self) -> tuple[Pairs, np.ndarray]:
        """All queries in one sequence (members first) with the member mask."""
        both = Pairs(np.concatenate([self.section_one.x1, self.section_two.x1]),
                     np.concatenate([self.section_one.x2, self.section_two.x2]))
        mask = np.zeros(len(both), dtype=bool)
        mask[: len(self.section_one)] = True
        return both, mask


def mix_lookup_set(members: Pairs, universe_seed: int, proportion: float, size: int,
                   negatives: str = "fresh") -> LookupSet:
    """Two-section query workload of ``size`` lookups.

    Section one samples ``round(proportion * size)`` members uniformly
    (with replacement).  Section two holds non-members: with
    ``negatives="fresh"`` both components are new random scalars, with
    ``"same-first"`` the first component is an existing one and only the
    second is fresh.  Every section-two pair is checked against the exact
    member set.
    """
    if not 0.0 <= proportion <= 1.0:
        raise InvalidParameterError(f"proportion must lie in [0, 1], got {proportion}")
    if size < 1:
        raise InvalidParameterError(f"size must be >= 1, got {size}")
    n_one = round(proportion * size)
    if n_one and len(members) == 0:
        raise InvalidParameterError("cannot sample members from an empty member set")
    if negatives not in ("fresh", "same-first"):
        raise InvalidParameterError(f"unknown negatives mode {negatives!r}")
    rng = np.random.default_rng(universe_seed)
    one = members.take(rng.integers(0, len(members), size=n_one)) if n_one else Pairs([], [])
    exact = members.pair_set()
    n_two = size - n_one
    xs1: list[int] = []
    xs2: list[int] = []
    firsts = np.unique(members.x1) if len(members) else None
    while len(xs1) < n_two:
        need = n_two - len(xs1)
        if negatives == "same-first" and firsts is not None:
            c1 = firsts[rng.integers(0, len(firsts), size=need)].tolist()
        else:
            c1 = rng.integers(0, 2**64, size=need, dtype=np.uint64).tolist()
        c2 = rng.integers(0, 2**64, size=need, dtype=np.uint64).tolist()
        for a, b in zip(c1, c2):
            if (a, b) not in exact:
                xs1.append(a)
                xs2.append(b)
    two = Pairs(xs1, xs2)
    if exact.intersection(two.pair_set()):
        raise AssertionError("section two contaminated by members")
    return LookupSet(one, two, proportion)


def write_pairs(pairs: Pairs, path, header: str | None = None) -> None:
    """Write ``x1<TAB>x2`` lines after a single ``#`` header line."""
    if header is None:
        header = " ".join(f"{k}={v}" for k, v in pairs.meta.items()) or "generator=unknown"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# {header}\n")
        for a, b in zip(pairs.x1.tolist(), pairs.x2.tolist()):
            fh.write(f"{a}\t{b}\n")


def read_pairs(path) -> Pairs:
    path = Path(path)
    if not path.exists():
        raise DatasetMissingError(f"{path} not found")
    meta: dict = {}
    xs1: list[int] = []
    xs2: list[int] = []
    with open(path, encoding="ascii") as fh:
        first = fh.readline()
        if first.startswith("#"):
            for token in first[1:].split():
                key, _, value = token.partition("=")
                meta[key] = value
        elif first.strip():
            a, b = first.split("\t")
            xs1.append(int(a))
            xs2.append(int(b))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                a, b = line.split("\t")
                xs1.append(int(a))
                xs2.append(int(b))
            except ValueError:
                raise InvalidParameterError(f"{path}:{lineno}: expected 'x1<TAB>x2'") from None
    return Pairs(xs1, xs2, meta)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_docword(name: str, out_dir, expected_sha256: str | None = None, url: str | None = None) -> Path:
    """Download a docword file into ``out_dir`` and verify its checksum.

    No reference digests are published, so the first download records its
    SHA-256 next to the file (``<file>.sha256``) and later fetches, or an
    explicit ``expected_sha256``, must match it.
    """
    if name not in DOCWORD_FILES:
        raise InvalidParameterError(f"unknown dataset {name!r}; choose from {sorted(DOCWORD_FILES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / DOCWORD_FILES[name]
    digest_file = target.with_name(target.name + ".sha256")
    if not target.exists():
        tmp = target.with_name(target.name + ".part")
        with urllib.request.urlopen(url or UCI_BASE + DOCWORD_FILES[name], timeout=60) as resp, open(tmp, "wb") as fh:
            while chunk := resp.read(1 << 20):
                fh.write(chunk)
        tmp.replace(target)
    digest = sha256_file(target)
    recorded = expected_sha256 or (digest_file.read_text().split()[0] if digest_file.exists() else None)
    if recorded is None:
        digest_file.write_text(f"{digest}  {target.name}\n")
    elif recorded != digest:
        raise ValueError(f"checksum mismatch for {target}: expected {recorded}, got {digest}")
    return target
