"""Maximum adaptive matrix planning and the minimum storage j-matrix.

The maximum adaptive matrix sizes rows and columns as two independent
optimal Bloom filters over the distinct first and second components, so
it tolerates any combination pattern of ``n1 x n2`` at the price of a
mostly empty matrix (about 25% load when full).

The j-matrix covers datasets with ``n1 = j * n2`` where first components
never repeat: a partition hash picks one of ``j`` square ``m x m``
matrices for ``x1`` and the squares share their column hashes, so the
whole structure is one ``jm x m`` bit matrix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np

from .bitmatrix import DEFAULT_BUDGET_BITS, BitMatrix
from .core import LN2, InstrumentationCounters, MatrixBloomFilter, MatrixBloomParams
from .errors import InvalidParameterError, SnapshotError
from .hashing import Component, PartitionHash, UniversalHashFamily, derive_seed

STORAGE_SLACK = 0.02


def _round_k(k_real: float, axis: str, warnings: list[str]) -> int:
    if k_real < 0.5:
        warnings.append(f"{axis}: optimal hash count {k_real:.4g} < 0.5, floored at 1")
    return max(1, round(k_real))


@dataclass(frozen=True)
class MaxAdaptivePlan:
    base: MatrixBloomParams
    fpr_theory: float
    fpr_theory_real: float
    m0: float
    storage_bound: float
    requested_m1: int | None = None
    requested_m2: int | None = None

    @property
    def k_sum(self) -> int:
        return self.base.k1 + self.base.k2

    def within_storage_bound(self, slack: float = STORAGE_SLACK) -> bool:
        return self.base.m <= self.storage_bound * (1 + slack)

    def to_text(self) -> str:
        """``key=value`` lines; :meth:`from_text` reverses it."""
        lines = [f"variant=max-adaptive"]
        for f in fields(self.base):
            value = getattr(self.base, f.name)
            if f.name == "warnings":
                value = ";".join(value)
            lines.append(f"{f.name}={'' if value is None else value}")
        for name in ("fpr_theory", "fpr_theory_real", "m0", "storage_bound", "requested_m1", "requested_m2"):
            value = getattr(self, name)
            lines.append(f"{name}={'' if value is None else repr(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MaxAdaptivePlan":
        kv = _parse_kv(text)
        if kv.pop("variant", None) != "max-adaptive":
            raise InvalidParameterError("not a max-adaptive plan")
        ints = {"m1", "m2", "k1", "k2", "n", "n1", "n2", "requested_m1", "requested_m2"}
        floats = {"k1_real", "k2_real", "fpr_theory", "fpr_theory_real", "m0", "storage_bound"}
        values = {}
        for key, raw in kv.items():
            if key == "warnings":
                values[key] = tuple(w for w in raw.split(";") if w)
            elif raw == "":
                values[key] = None
            elif key in ints:
                values[key] = int(raw)
            elif key in floats:
                values[key] = float(raw)
            else:
                raise InvalidParameterError(f"unknown plan key {key!r}")
        base = MatrixBloomParams(**{f.name: values.pop(f.name) for f in fields(MatrixBloomParams) if f.name in values})
        return cls(base=base, **values)


def _parse_kv(text: str) -> dict[str, str]:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidParameterError(f"malformed plan line {line!r}")
        kv[key.strip()] = value.strip()
    return kv


def plan_max_adaptive_k(n1: int, n2: int, k1: int, k2: int, k1_real: float | None = None,
                        k2_real: float | None = None, warnings: tuple[str, ...] = (),
                        requested: tuple[int, int] | None = None) -> MaxAdaptivePlan:
    """Plan from integer per-axis hash counts: ``m_i = floor(k_i n_i / ln 2)``.

    Rounding each side down keeps ``m1 m2 <= m0^2 / (4 n1 n2)`` exact.
    """
    if min(n1, n2, k1, k2) < 1:
        raise InvalidParameterError("n1, n2, k1, k2 must be >= 1")
    m1 = max(1, math.floor(k1 * n1 / LN2))
    m2 = max(1, math.floor(k2 * n2 / LN2))
    base = MatrixBloomParams(
        m1=m1, m2=m2, k1=k1, k2=k2, n=n1 * n2, n1=n1, n2=n2,
        k1_real=k1 if k1_real is None else k1_real,
        k2_real=k2 if k2_real is None else k2_real,
        warnings=tuple(warnings),
    )
    m0 = (k1 + k2) * n1 * n2 / LN2
    real_sum = base.k1_real + base.k2_real
    return MaxAdaptivePlan(
        base=base,
        fpr_theory=0.5 ** (k1 + k2),
        fpr_theory_real=0.5**real_sum,
        m0=m0,
        storage_bound=m0**2 / (4 * n1 * n2),
        requested_m1=None if requested is None else requested[0],
        requested_m2=None if requested is None else requested[1],
    )


def plan_max_adaptive(n1: int, n2: int, m1: int, m2: int) -> MaxAdaptivePlan:
    """Per-axis optimal hash counts for a requested ``m1 x m2`` geometry.

    ``k_i = (m_i / n_i) ln 2`` is rounded (minimum 1) and the sides are
    then recomputed from the rounded counts so the optimum still holds;
    the requested sides are kept on the plan for reporting.
    """
    if min(n1, n2, m1, m2) < 1:
        raise InvalidParameterError("n1, n2, m1, m2 must be >= 1")
    warnings: list[str] = []
    k1_real = m1 / n1 * LN2
    k2_real = m2 / n2 * LN2
    k1 = _round_k(k1_real, "rows", warnings)
    k2 = _round_k(k2_real, "columns", warnings)
    return plan_max_adaptive_k(n1, n2, k1, k2, k1_real, k2_real, tuple(warnings), (m1, m2))


def plan_max_adaptive_ratio(n1: int, n2: int, k_sum: int, ratio: float) -> MaxAdaptivePlan:
    """Plan with ``k1 + k2 = k_sum`` and side ratio ``m1 / m2`` close to ``ratio``.

    At the per-axis optimum ``k1 / k2 = (m1 / m2) (n2 / n1)``; the real
    split is rounded to integers and the sides follow from the rounded
    counts.
    """
    if k_sum < 2:
        raise InvalidParameterError("k_sum must be >= 2 so each axis gets a hash")
    if ratio <= 0:
        raise InvalidParameterError("ratio must be positive")
    q = ratio * n2 / n1
    k1_real = k_sum * q / (1 + q)
    k1 = min(k_sum - 1, max(1, round(k1_real)))
    return plan_max_adaptive_k(n1, n2, k1, k_sum - k1, k1_real, k_sum - k1_real)


def mam_filter(plan: MaxAdaptivePlan, seed: int = 0, **kwargs) -> MatrixBloomFilter:
    return MatrixBloomFilter(plan.base, seed, **kwargs)


def load_reference_loads() -> list[dict[str, float]]:
    """Load factors measured in the original study (not produced here).

    Rows have keys ``proportion``, ``ratio_1_4``, ``ratio_1_2`` and ``ratio_1``.
    """
    text = resources.files("mbf.data").joinpath("reference_load_factor.csv").read_text()
    rows = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
    return [{k: float(v) for k, v in row.items()} for row in rows]


_RATIO_COLUMNS = {0.25: "ratio_1_4", 0.5: "ratio_1_2", 1.0: "ratio_1"}


def mam_load_factor_expectation(fill_fraction: float, ratio: float | None = None) -> float:
    """Expected load factor of a maximum adaptive matrix at a given fill.

    A full matrix is predicted at exactly 0.25 (half the rows times half
    the columns).  Partial fills have no closed form; they interpolate the
    measured reference curve for ``ratio`` (or the mean over the three
    measured ratios), anchored at (0, 0).
    """
    if not 0.0 <= fill_fraction <= 1.0:
        raise InvalidParameterError("fill_fraction must lie in [0, 1]")
    if fill_fraction == 1.0:
        return 0.25
    if fill_fraction == 0.0:
        return 0.0
    table = load_reference_loads()
    if ratio is None:
        ys = [np.mean([row[c] for c in _RATIO_COLUMNS.values()]) for row in table]
    else:
        try:
            column = _RATIO_COLUMNS[ratio]
        except KeyError:
            raise InvalidParameterError(f"no reference curve for ratio {ratio}") from None
        ys = [row[column] for row in table]
    xs = [0.0] + [row["proportion"] for row in table]
    return float(np.interp(fill_fraction, xs, [0.0] + ys))


FILL_KEYS = "keys"
FILL_TUPLES = "tuples"


def mam_fill_theory(params: MatrixBloomParams, proportion: float, fill: str = FILL_KEYS) -> tuple[float, float]:
    """Expected ``(load factor, false positive rate)`` of a partly filled max-adaptive matrix.

    With ``fill="keys"`` a fraction ``proportion`` of the first components
    is inserted with every second component.  A row is then used with
    probability ``1 - exp(-k1 p n1 / m1)`` and a column with
    ``1 - exp(-k2 n2 / m2)``; the load is their product and a fresh query
    needs all its rows and columns used.  ``fill="tuples"`` (a uniform
    subset of the cross product) has no closed form for the rate;
    its load is the Poisson double sum evaluated numerically.
    """
    if not 0.0 <= proportion <= 1.0:
        raise InvalidParameterError("proportion must lie in [0, 1]")
    if params.n1 is None or params.n2 is None:
        raise InvalidParameterError("plan lacks n1/n2")
    lam1 = params.k1 * params.n1 / params.m1
    lam2 = params.k2 * params.n2 / params.m2
    if fill == FILL_KEYS:
        rows = -math.expm1(-lam1 * proportion)
        cols = -math.expm1(-lam2)
        return rows * cols, rows**params.k1 * cols**params.k2
    if fill == FILL_TUPLES:
        a = np.arange(80)
        pa = np.exp(-lam1 + a * math.log(lam1) - np.array([math.lgamma(x + 1) for x in a]))
        pb = np.exp(-lam2 + a * math.log(lam2) - np.array([math.lgamma(x + 1) for x in a]))
        unset = (np.outer(pa, pb) * (1.0 - proportion) ** np.outer(a, a)).sum()
        return float(1.0 - unset), float("nan")
    raise InvalidParameterError(f"unknown fill mode {fill!r}")


def jm_theoretical_fpr(j: int, m: int, n1: int) -> float:
    """Closed form ``(1/2)^(j m^2 ln2 / n1^2)`` stated for the j-matrix."""
    if min(j, m, n1) < 1:
        raise InvalidParameterError("j, m, n1 must be >= 1")
    return 0.5 ** (j * m * m * LN2 / (n1 * n1))


def jm_standard_equivalent_fpr(j: int, m: int, n1: int) -> float:
    """Optimum of a standard filter with ``j m^2`` bits holding ``n1`` items.

    Equals the per-square optimum ``(1/2)^(m^2 ln2 / n2)`` since each of
    the ``j`` squares receives ``n2 = n1 / j`` tuples on average.
    """
    if min(j, m, n1) < 1:
        raise InvalidParameterError("j, m, n1 must be >= 1")
    return 0.5 ** (j * m * m * LN2 / n1)


@dataclass(frozen=True)
class JMatrixGeometry:
    j: int
    m: int
    k: int
    n1: int
    n2: int
    exponent: float
    rule: str

    @property
    def bits(self) -> int:
        return self.j * self.m * self.m

    @property
    def fpr_theory(self) -> float:
        return jm_theoretical_fpr(self.j, self.m, self.n1)

    @property
    def fpr_standard_equivalent(self) -> float:
        return jm_standard_equivalent_fpr(self.j, self.m, self.n1)

    def to_text(self) -> str:
        items = asdict(self) | {"bits": self.bits, "fpr_theory": self.fpr_theory,
                                "fpr_standard_equivalent": self.fpr_standard_equivalent}
        return "variant=j-matrix\n" + "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in items.items())


def _split_j(n1: int, n2: int) -> int:
    if n1 < 1 or n2 < 1:
        raise InvalidParameterError("n1 and n2 must be >= 1")
    if n1 % n2:
        raise InvalidParameterError(f"n2={n2} does not divide n1={n1}")
    return n1 // n2


def jm_plan(n1: int, n2: int, exponent: float, k: int | None = None) -> JMatrixGeometry:
    """Square side from the target exponent ``j m^2 ln2 / n1^2``.

    ``k`` per axis defaults to ``round(sqrt(exponent))`` so that the
    ``k^2`` bits per tuple match the exponent at the optimum.
    """
    j = _split_j(n1, n2)
    if exponent <= 0:
        raise InvalidParameterError("exponent must be positive")
    m = max(1, math.ceil(n1 * math.sqrt(exponent / (j * LN2))))
    k = max(1, round(math.sqrt(exponent))) if k is None else k
    return JMatrixGeometry(j=j, m=m, k=k, n1=n1, n2=n2, exponent=exponent, rule="closed-form")


def jm_plan_per_square(n1: int, n2: int, k: float) -> JMatrixGeometry:
    """Square side from the per-square optimum ``k^2 = (m^2 / n2) ln2``.

    ``k`` may be non-integer: the side is computed from it and the hash
    count used by the filter is its rounding.
    """
    j = _split_j(n1, n2)
    if k <= 0:
        raise InvalidParameterError("k must be positive")
    m = max(1, math.ceil(k * math.sqrt(n2 / LN2)))
    return JMatrixGeometry(j=j, m=m, k=max(1, round(k)), n1=n1, n2=n2,
                           exponent=m * m * LN2 / n2, rule="per-square")


class JMatrixFilter(MatrixBloomFilter):
    """``j`` glued ``m x m`` squares selected by a partition hash on ``x1``.

    Global row of ``x1`` is ``square * m + rowhash(x1)``; column hashes
    are the same in every square.
    """

    def __init__(self, geometry: JMatrixGeometry, seed: int = 0, *, short_circuit: bool = True,
                 budget_bits: int = DEFAULT_BUDGET_BITS):
        g = geometry
        self.geometry = g
        self.params = MatrixBloomParams(m1=g.j * g.m, m2=g.m, k1=g.k, k2=g.k, n=g.n1)
        self.matrix = BitMatrix(g.j * g.m, g.m, budget_bits)
        self.row_seed = derive_seed(seed, 1)
        self.col_seed = derive_seed(seed, 2)
        self.part = PartitionHash(g.j, derive_seed(seed, 3))
        self.row_hashes = UniversalHashFamily(g.k, g.m, self.row_seed, distinct=True)
        self.col_hashes = UniversalHashFamily(g.k, g.m, self.col_seed, distinct=True)
        self.short_circuit = short_circuit
        self.inserted = 0
        self.metrics = InstrumentationCounters()
        self._frozen = False

    def __repr__(self):
        g = self.geometry
        return f"JMatrixFilter(j={g.j}, m={g.m}, k={g.k}, inserted={self.inserted})"

    def square_of(self, x1: Component) -> int:
        self.metrics.add(partition_invocations=1)
        return self.part(x1)

    def row_indices(self, x1: Component) -> list[int]:
        offset = self.square_of(x1) * self.geometry.m
        self.metrics.add(row_hash_invocations=self.params.k1)
        return [offset + r for r in self.row_hashes.indices(x1)]

    def rows_many(self, x1s) -> np.ndarray:
        squares = self.part.classify_many(x1s)
        rows = self.row_hashes.indices_many(x1s)
        self.metrics.add(partition_invocations=len(rows), row_hash_invocations=len(rows) * self.params.k1)
        return rows + (squares * self.geometry.m)[:, None]

    def square_fill(self) -> list[float]:
        """Load factor of each square, for spotting uneven partitions."""
        m = self.geometry.m
        return [self.matrix.popcount(s * m, (s + 1) * m) / (m * m) for s in range(self.geometry.j)]

    def theoretical_fpr(self, n_actual: int | None = None) -> float:
        """Per-square estimate with ``n_actual / j`` tuples in each square."""
        n = self.inserted if n_actual is None else n_actual
        if n == 0:
            return 0.0
        g = self.geometry
        k = g.k * g.k
        return (-math.expm1(-(n / g.j) * k / (g.m * g.m))) ** k

    def to_bytes(self) -> bytes:
        raise SnapshotError("j-matrix snapshots are not supported")


def jm_insert(f: JMatrixFilter, x1: Component, x2: Component) -> None:
    f.insert(x1, x2)


def jm_query(f: JMatrixFilter, x1: Component, x2: Component) -> bool:
    return f.query(x1, x2)
