"""Experiment runners behind ``mbf run``.

Each runner takes an :class:`ExperimentSpec` and returns
:class:`ResultRow` objects, one per parameter point and structure.
Every row is determined by the ExperimentSpec and its seed; only the optional
wall-clock column varies between runs.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable

import numpy as np

from .baselines import ChainedHashTable, DoubleHashTable
from .batch import FIRST_THEN_SECOND, SECOND_THEN_FIRST, double_side_query
from .core import MatrixBloomFilter, MatrixBloomParams, StandardBloomFilter, balanced_split, plan_generic, theoretical_fpr
from .datasets import Pairs, distinct_scalars, gen_full_repeating, gen_no_repeating, mix_lookup_set, parse_docword, read_pairs
from .errors import InvalidParameterError
from .hashing import derive_seed
from .multiset import (VBF, GeneralMultisetIndex, gmi_false_inclusion_theory, gmi_planned_bits,
                       vbf_false_inclusion_theory, vbf_planned_bits)
from .stats import mean_and_se
from .variants import (FILL_KEYS, FILL_TUPLES, JMatrixFilter, jm_plan, jm_plan_per_square, jm_theoretical_fpr, load_reference_loads, mam_filter, mam_fill_theory,
                       plan_max_adaptive_k, plan_max_adaptive_ratio)

EXPERIMENTS = ("fpr-generic", "fpr-mam", "fpr-jmatrix", "load-factor", "batch-compare", "double-side", "multiset")

# Desk-scale defaults per experiment; FULL_SIZE overrides them under --full-size.
DEFAULTS: dict[str, dict] = {
    "fpr-generic": {"n": 1024, "k": [1, 2, 3, 4, 6, 8, 9, 12, 16], "k1": None, "queries": 10_000},
    "fpr-mam": {"n1": 256, "n2": 512, "ratio": [1.0, 0.5, 0.25], "k": [4, 6, 8], "proportion": [1.0], "fill": "keys",
                "queries": 2_000},
    "load-factor": {"n1": 256, "n2": 512, "ratio": [1.0, 0.5, 0.25], "k": [6], "proportion": [0.2, 0.4, 0.6, 0.8, 1.0],
                    "fill": "keys"},
    "fpr-jmatrix": {"n2": 144, "j": [1, 2, 10], "k": [2, 3], "rule": ["per-square", "closed-form"], "queries": 20_000},
    "batch-compare": {"dataset": None, "n1": 200, "values_per_key": [1, 2, 4, 6, 8, 10],
                      "proportion": [0.0, 0.25, 0.5, 0.75, 1.0], "length_multiplier": [1], "k1": 2, "k2": 2,
                      "queries": 5_000, "timing": False},
    "double-side": {"n1": 200, "n2": [25, 50, 100], "proportion": 0.5, "k1": 2, "k2": 2, "queries": 5_000,
                    "timing": False},
    "multiset": {"sets": 16, "set_size": 64, "k": 4, "k1": 2, "possible_sets": 10_000, "used_sets": 50,
                 "n_elements": 1_000},
}

FULL_SIZE: dict[str, dict] = {
    "fpr-generic": {"queries": 100_000},
    "fpr-mam": {"queries": 10_000},
    "fpr-jmatrix": {"j": [1, 2, 10, 40, 100], "queries": 100_000},
    "batch-compare": {"n1": 1000},
    "double-side": {"n1": 500, "n2": [100, 300, 500, 700]},
}

DEFAULT_TRIALS = {"fpr-generic": 10, "fpr-mam": 50, "load-factor": 5, "fpr-jmatrix": 10, "batch-compare": 1,
                  "double-side": 1, "multiset": 20}

_LIST_KEYS = {"k", "ratio", "proportion", "j", "rule", "values_per_key", "length_multiplier", "n2"}


@dataclass
class ExperimentSpec:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    trials: int | None = None
    out: str | None = None
    full_size: bool = False

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise InvalidParameterError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        unknown = set(self.params) - set(DEFAULTS[self.experiment])
        if unknown:
            raise InvalidParameterError(f"{self.experiment} does not take {', '.join(sorted(unknown))}")
        if self.trials is None:
            self.trials = DEFAULT_TRIALS[self.experiment]
        if self.trials < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {self.trials}")

    def resolved(self) -> dict:
        p = dict(DEFAULTS[self.experiment])
        if self.full_size:
            p.update(FULL_SIZE.get(self.experiment, {}))
        p.update(self.params)
        if self.experiment == "double-side" and not isinstance(p["n2"], list):
            p["n2"] = [p["n2"]]
        return p


@dataclass
class ResultRow:
    experiment: str
    variant: str
    k: int | None = None
    k1: int | None = None
    k2: int | None = None
    m1: int | None = None
    m2: int | None = None
    n: int | None = None
    n1: int | None = None
    n2: int | None = None
    j: int | None = None
    ratio: float | None = None
    proportion: float | None = None
    values_per_key: int | None = None
    length_multiplier: int | None = None
    direction: str | None = None
    fill: str | None = None
    theory: float | None = None
    theory_alt: float | None = None
    reference: float | None = None
    empirical: float | None = None
    trials: int | None = None
    queries: int | None = None
    se: float | None = None
    bits: int | None = None
    status: str = "ok"
    note: str = ""
    wall_clock_us: float | None = None


COLUMNS = [f.name for f in fields(ResultRow)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def write_csv(rows: Iterable[ResultRow], path_or_file) -> None:
    """Header row then one comma-separated line per result."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    finally:
        if own:
            fh.close()


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def recompute_theory(row: dict) -> float | None:
    """Closed-form theory of a CSV row from its parameter columns alone."""
    exp, variant = row["experiment"], row["variant"]
    ival = lambda c: int(row[c])  # noqa: E731
    if not row.get("theory"):
        return None
    if exp == "fpr-generic":
        return theoretical_fpr(MatrixBloomParams(ival("m1"), ival("m2"), ival("k1"), ival("k2"), ival("n")))
    if exp in ("fpr-mam", "load-factor"):
        prop = float(row["proportion"])
        if exp == "fpr-mam" and prop >= 1.0:
            return 0.5 ** (ival("k1") + ival("k2"))
        base = MatrixBloomParams(ival("m1"), ival("m2"), ival("k1"), ival("k2"), ival("n"), ival("n1"), ival("n2"))
        load, fpr = mam_fill_theory(base, prop, row["fill"])
        return fpr if exp == "fpr-mam" else load
    if exp == "fpr-jmatrix":
        if variant == "j-matrix":
            return jm_theoretical_fpr(ival("j"), ival("m2"), ival("n1"))
        return theoretical_fpr(MatrixBloomParams(1, ival("m2"), 1, ival("k2"), ival("n1")))
    if exp == "multiset":
        if variant == "vbf":
            return vbf_false_inclusion_theory(ival("m2"), ival("k"), ival("n2"))
        return gmi_false_inclusion_theory(ival("m1"), ival("m2"), ival("k1"), ival("k2"), ival("n1"), ival("n2"))
    return None


def median_wall_clock_us(fn: Callable[[], object], count: int, reps: int = 5) -> float:
    """Median over ``reps`` runs of ``fn`` timed with the monotonic clock, per item."""
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples.append((time.perf_counter_ns() - t0) / 1e3 / max(count, 1))
    return statistics.median(samples)


def _negatives(rng: np.random.Generator, n: int, avoid_first: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairs guaranteed absent: the first component is never a stored one."""
    return distinct_scalars(rng, n, exclude=set(avoid_first.tolist())), rng.integers(0, 2**64, n, dtype=np.uint64)


def run_fpr_generic(spec: ExperimentSpec) -> list[ResultRow]:
    p = spec.resolved()
    n, queries = p["n"], p["queries"]
    rows = []
    for k in p["k"]:
        if p["k1"] is not None:
            if k % p["k1"]:
                rows.append(ResultRow("fpr-generic", "matrix", k=k, n=n, status="skipped",
                                      note=f"k={k} has no split with k1={p['k1']}"))
                continue
            split = (p["k1"], k // p["k1"])
        else:
            split = balanced_split(k)
        params = plan_generic(n, k, split)
        rates = {"matrix": [], "standard": []}
        for t in range(spec.trials):
            ts = derive_seed(spec.seed, k, t)
            data = gen_no_repeating(n, ts)
            rng = np.random.default_rng(derive_seed(ts, 9))
            q1, q2 = _negatives(rng, queries, data.x1)
            f = MatrixBloomFilter(params, ts)
            f.insert_many(data.x1, data.x2)
            rates["matrix"].append(float(f.query_many(q1, q2).mean()))
            s = StandardBloomFilter(params.m, k, ts, n=n)
            s.add_pairs(data.x1, data.x2)
            rates["standard"].append(float(s.contains_pairs(q1, q2).mean()))
        theory = theoretical_fpr(params, n)
        for variant, r in rates.items():
            mean, se = mean_and_se(r)
            m1, m2 = (params.m1, params.m2) if variant == "matrix" else (1, params.m)
            k1, k2 = (params.k1, params.k2) if variant == "matrix" else (1, k)
            rows.append(ResultRow("fpr-generic", variant, k=k, k1=k1, k2=k2, m1=m1, m2=m2, n=n, theory=theory,
                                  empirical=mean, trials=spec.trials, queries=queries * spec.trials, se=se,
                                  bits=params.m))
    return rows


def _mam_fill(f: MatrixBloomFilter, a: np.ndarray, b: np.ndarray, proportion: float, rng, fill: str) -> int:
    """Insert a ``proportion`` of the cross product ``a x b``.

    ``fill="keys"`` takes a random subset of ``a`` with all of ``b``;
    ``fill="tuples"`` a uniform random subset of the pairs.
    """
    total = len(a) * len(b)
    if proportion >= 1.0:
        f.insert_product(a, b)
        return total
    if fill == FILL_KEYS:
        keys = rng.choice(len(a), size=round(proportion * len(a)), replace=False)
        if len(keys):
            f.insert_product(a[keys], b)
        return len(keys) * len(b)
    if fill != FILL_TUPLES:
        raise InvalidParameterError(f"unknown fill mode {fill!r}")
    count = round(proportion * total)
    if count:
        pick = rng.choice(total, size=count, replace=False)
        f.insert_many(a[pick // len(b)], b[pick % len(b)])
    return count


def run_fpr_mam(spec: ExperimentSpec) -> list[ResultRow]:
    p = spec.resolved()
    n1, n2, queries = p["n1"], p["n2"], p["queries"]
    rows = []
    for ratio in p["ratio"]:
        for k_sum in p["k"]:
            plan = plan_max_adaptive_ratio(n1, n2, k_sum, ratio)
            for prop in p["proportion"]:
                rates = []
                for t in range(spec.trials):
                    ts = derive_seed(spec.seed, k_sum, int(ratio * 1000), int(prop * 1000), t)
                    data = gen_full_repeating(n1, n2, ts)
                    a, b = data.x1[::n2], data.x2[:n2]
                    rng = np.random.default_rng(derive_seed(ts, 9))
                    f = mam_filter(plan, ts)
                    _mam_fill(f, a, b, prop, rng, p["fill"])
                    q1, q2 = _negatives(rng, queries, a)
                    rates.append(float(f.query_many(q1, q2).mean()))
                mean, se = mean_and_se(rates)
                b_ = plan.base
                if prop >= 1.0:
                    theory, alt = plan.fpr_theory, mam_fill_theory(b_, 1.0)[1]
                elif p["fill"] == FILL_KEYS:
                    theory, alt = mam_fill_theory(b_, prop)[1], None
                else:
                    theory = alt = None
                rows.append(ResultRow("fpr-mam", "max-adaptive", k=k_sum, k1=b_.k1, k2=b_.k2, m1=b_.m1, m2=b_.m2,
                                      n=b_.n, n1=n1, n2=n2, ratio=ratio, proportion=prop, fill=p["fill"],
                                      theory=theory, theory_alt=alt, empirical=mean,
                                      trials=spec.trials, queries=queries * spec.trials, se=se, bits=b_.m,
                                      note=f"m1/m2={b_.m1 / b_.m2:.4g}"))
    return rows


_REFERENCE_COLUMNS = {1.0: "ratio_1", 0.5: "ratio_1_2", 0.25: "ratio_1_4"}


def run_loadfactor(spec: ExperimentSpec) -> list[ResultRow]:
    p = spec.resolved()
    n1, n2 = p["n1"], p["n2"]
    table = {row["proportion"]: row for row in load_reference_loads()}
    rows = []
    for ratio in p["ratio"]:
        for k_sum in p["k"]:
            plan = plan_max_adaptive_ratio(n1, n2, k_sum, ratio)
            for prop in p["proportion"]:
                loads = []
                for t in range(spec.trials):
                    ts = derive_seed(spec.seed, k_sum, int(ratio * 1000), int(prop * 1000), t, 1)
                    data = gen_full_repeating(n1, n2, ts)
                    f = mam_filter(plan, ts)
                    _mam_fill(f, data.x1[::n2], data.x2[:n2], prop, np.random.default_rng(derive_seed(ts, 9)),
                              p["fill"])
                    loads.append(f.load_factor())
                mean, se = mean_and_se(loads)
                ref_row = table.get(round(prop, 6))
                ref = ref_row[_REFERENCE_COLUMNS[ratio]] if ref_row and ratio in _REFERENCE_COLUMNS else None
                b_ = plan.base
                rows.append(ResultRow("load-factor", "max-adaptive", k=k_sum, k1=b_.k1, k2=b_.k2, m1=b_.m1,
                                      m2=b_.m2, n=b_.n, n1=n1, n2=n2, ratio=ratio, proportion=prop, fill=p["fill"],
                                      theory=mam_fill_theory(b_, prop, p["fill"])[0], reference=ref, empirical=mean,
                                      trials=spec.trials, se=se, bits=b_.m))
    return rows


def run_fpr_jmatrix(spec: ExperimentSpec) -> list[ResultRow]:
    p = spec.resolved()
    n2, queries = p["n2"], p["queries"]
    rows = []
    for rule in p["rule"]:
        for j in p["j"]:
            n1 = j * n2
            for k in p["k"]:
                try:
                    geom = jm_plan_per_square(n1, n2, k) if rule == "per-square" else jm_plan(n1, n2, k * k, k)
                    JMatrixFilter(geom)  # capacity check before the trials
                except (InvalidParameterError, MemoryError) as exc:
                    rows.append(ResultRow("fpr-jmatrix", "j-matrix", k=k, n1=n1, n2=n2, j=j, status="skipped",
                                          note=f"{rule}: {exc}"))
                    continue
                rates = {"j-matrix": [], "standard": []}
                for t in range(spec.trials):
                    ts = derive_seed(spec.seed, j, k, t, 0 if rule == "per-square" else 1)
                    data = gen_no_repeating(n1, ts)
                    rng = np.random.default_rng(derive_seed(ts, 9))
                    q1, q2 = _negatives(rng, queries, data.x1)
                    f = JMatrixFilter(geom, ts)
                    f.insert_many(data.x1, data.x2)
                    rates["j-matrix"].append(float(f.query_many(q1, q2).mean()))
                    s = StandardBloomFilter(geom.bits, k * k, ts, n=n1)
                    s.add_pairs(data.x1, data.x2)
                    rates["standard"].append(float(s.contains_pairs(q1, q2).mean()))
                for variant, r in rates.items():
                    mean, se = mean_and_se(r)
                    if variant == "j-matrix":
                        extra = dict(k1=k, k2=k, m1=j * geom.m, m2=geom.m, theory=geom.fpr_theory,
                                     theory_alt=geom.fpr_standard_equivalent)
                    else:
                        extra = dict(k1=1, k2=k * k, m1=1, m2=geom.bits,
                                     theory=theoretical_fpr(MatrixBloomParams(1, geom.bits, 1, k * k, n1)))
                    rows.append(ResultRow("fpr-jmatrix", variant, k=k, n=n1, n1=n1, n2=n2, j=j, empirical=mean,
                                          trials=spec.trials, queries=queries * spec.trials, se=se, bits=geom.bits,
                                          note=rule, **extra))
    return rows


def _load_dataset(path) -> Pairs:
    if str(path).endswith((".txt", ".gz")) and "docword" in str(path):
        return parse_docword(path).pairs
    return read_pairs(path)


def _lookup(members: Pairs, seed: int, proportion: float, size: int):
    ls = mix_lookup_set(members, seed, proportion, size)
    both, _ = ls.combined()
    return both.x1.tolist(), both.x2.tolist(), both


def _hashmap_average(table: ChainedHashTable, x1s, x2s) -> float:
    table.reset_counters()
    for a, b in zip(x1s, x2s):
        table.query(a, b)
    return table.average_comparisons()


def _matrix_compare_rows(f: MatrixBloomFilter, both: Pairs, base: dict, timing: bool) -> list[ResultRow]:
    out = []
    for short, name in ((False, "matrix"), (True, "matrix-short-circuit")):
        f.short_circuit = short
        f.metrics.reset()
        f.query_many(both.x1, both.x2)
        avg = f.metrics.bit_comparisons / len(both)
        wc = median_wall_clock_us(lambda: f.query_many(both.x1, both.x2), len(both)) if timing else None
        out.append(ResultRow(variant=name, empirical=avg, theory=None, wall_clock_us=wc, **base))
    f.short_circuit = False
    return out


def run_batch_compare(spec: ExperimentSpec) -> list[ResultRow]:
    """Average comparisons per query, filter versus chained hash table.

    Synthetic mode sweeps values per key over full-repeating data with
    ``n1`` keys; ``dataset`` replaces it with one file.  Section one of
    each lookup set holds members, section two fresh non-members.
    """
    p = spec.resolved()
    k1, k2, queries = p["k1"], p["k2"], p["queries"]
    if p["dataset"]:
        sources = [(None, _load_dataset(p["dataset"]))]
    else:
        sources = [(v, gen_full_repeating(p["n1"], v, derive_seed(spec.seed, v))) for v in p["values_per_key"]]
    rows = []
    for vpk, data in sources:
        keys, values = data.distinct_first(), data.distinct_second()
        plan = plan_max_adaptive_k(keys, values, k1, k2) if keys * values >= len(data) else None
        params = plan.base if plan else plan_generic(len(data), k1 * k2, (k1, k2))
        f = MatrixBloomFilter(params, derive_seed(spec.seed, 1), short_circuit=False)
        f.insert_many(data.x1, data.x2)
        pairs = list(zip(data.x1.tolist(), data.x2.tolist()))
        tables = {mult: ChainedHashTable.for_pairs(pairs, length=mult * keys) for mult in p["length_multiplier"]}
        for prop in p["proportion"]:
            x1s, x2s, both = _lookup(data, derive_seed(spec.seed, 2, int(prop * 1000)), prop, queries)
            base = dict(experiment="batch-compare", k=k1 * k2, k1=k1, k2=k2, m1=params.m1, m2=params.m2,
                        n=len(data), n1=keys, n2=values, proportion=prop, values_per_key=vpk,
                        trials=1, queries=queries)
            rows.extend(_matrix_compare_rows(f, both, base, p["timing"]))
            for mult, table in tables.items():
                avg = _hashmap_average(table, x1s, x2s)
                wc = median_wall_clock_us(lambda: [table.query(a, b) for a, b in zip(x1s, x2s)], queries) if p["timing"] else None
                rows.append(ResultRow(variant="hashmap", empirical=avg, length_multiplier=mult, wall_clock_us=wc,
                                      **{**base, "m1": None, "m2": None}))
    return rows


def run_double_side(spec: ExperimentSpec) -> list[ResultRow]:
    """Comparisons for (key, value) and (value, key) lookups on full-repeating data."""
    p = spec.resolved()
    n1, k1, k2, queries = p["n1"], p["k1"], p["k2"], p["queries"]
    rows = []
    for n2 in p["n2"]:
        data = gen_full_repeating(n1, n2, derive_seed(spec.seed, n2))
        plan = plan_max_adaptive_k(n1, n2, k1, k2)
        f = mam_filter(plan, derive_seed(spec.seed, 1), short_circuit=False)
        f.insert_product(data.x1[::n2], data.x2[:n2])
        dt = DoubleHashTable.for_pairs(zip(data.x1.tolist(), data.x2.tolist()))
        x1s, x2s, both = _lookup(data, derive_seed(spec.seed, 2, n2), p["proportion"], queries)
        base = dict(experiment="double-side", k=k1 * k2, k1=k1, k2=k2, n=len(data), n1=n1, n2=n2,
                    proportion=p["proportion"], trials=1, queries=queries)
        for order, direction in ((FIRST_THEN_SECOND, "key-value"), (SECOND_THEN_FIRST, "value-key")):
            f.metrics.reset()
            for a, b in zip(x1s, x2s):
                double_side_query(f, a, b, order)
            wc = None
            if p["timing"]:
                wc = median_wall_clock_us(lambda: [double_side_query(f, a, b, order) for a, b in zip(x1s, x2s)], queries)
            rows.append(ResultRow(variant="matrix", direction=direction, m1=plan.base.m1, m2=plan.base.m2,
                                  empirical=f.metrics.bit_comparisons / queries, wall_clock_us=wc, **base))
            table, args = (dt.forward, (x1s, x2s)) if direction == "key-value" else (dt.backward, (x2s, x1s))
            avg = _hashmap_average(table, *args)
            wc = median_wall_clock_us(lambda: [table.query(a, b) for a, b in zip(*args)], queries) if p["timing"] else None
            rows.append(ResultRow(variant="hashmap", direction=direction, empirical=avg, wall_clock_us=wc, **base))
    return rows


def multiset_trial(num_sets: int, set_size: int, k: int, k1: int, seed: int) -> dict[str, float]:
    """False-inclusion rates of a vBF and the matrix index on one random universe.

    Every element is asked about every set it does not belong to.
    """
    rng = np.random.default_rng(seed)
    elements = distinct_scalars(rng, num_sets * set_size)
    set_ids = np.repeat(np.arange(num_sets, dtype=np.uint64), set_size)
    vbf = VBF.for_sets([set_size] * num_sets, k, seed)
    vbf.insert_many(set_ids, elements)
    verdicts = vbf.membership_matrix(elements)
    wrong = np.arange(num_sets)[:, None] != set_ids[None, :]
    gmi = GeneralMultisetIndex.plan(num_sets * set_size, k, seed, split=(k1, k // k1))
    gmi.insert_many(set_ids, elements)
    asked = np.tile(np.arange(num_sets, dtype=np.uint64), len(elements))
    hits = gmi.filter.query_many(asked, np.repeat(elements, num_sets))
    wrong_g = asked != np.repeat(set_ids, num_sets)
    return {
        "vbf": float(verdicts[wrong].mean()),
        "gmi": float(hits[wrong_g].mean()),
        "vbf_misses": int((~verdicts[~wrong]).sum()),
        "gmi_misses": int((~hits[~wrong_g]).sum()),
        "vbf_m": vbf.sizes[0],
        "gmi_params": gmi.filter.params,
    }


def run_multiset(spec: ExperimentSpec) -> list[ResultRow]:
    p = spec.resolved()
    V, E, k, k1 = p["sets"], p["set_size"], p["k"], p["k1"]
    if k % k1:
        raise InvalidParameterError(f"k1={k1} does not divide k={k}")
    trials = [multiset_trial(V, E, k, k1, derive_seed(spec.seed, t)) for t in range(spec.trials)]
    rows = []
    misses = sum(t["vbf_misses"] + t["gmi_misses"] for t in trials)
    gp = trials[0]["gmi_params"]
    m = trials[0]["vbf_m"]
    queries = V * E * (V - 1) * spec.trials
    for variant, theory, geom in (
        ("vbf", vbf_false_inclusion_theory(m, k, E), dict(k1=1, k2=k, m1=V, m2=m)),
        ("gmi", gmi_false_inclusion_theory(gp.m1, gp.m2, gp.k1, gp.k2, V, E),
         dict(k1=gp.k1, k2=gp.k2, m1=gp.m1, m2=gp.m2)),
    ):
        mean, se = mean_and_se([t[variant] for t in trials])
        rows.append(ResultRow("multiset", variant, k=k, n=V * E, n1=V, n2=E, theory=theory, empirical=mean,
                              trials=spec.trials, queries=queries, se=se, bits=geom["m1"] * geom["m2"],
                              note=f"false negatives={misses}", **geom))
    X, used, n_el = p["possible_sets"], p["used_sets"], p["n_elements"]
    rows.append(ResultRow("multiset", "planned-bits-vbf", k=k, n=n_el, n1=X, n2=used,
                          bits=vbf_planned_bits(X, math.ceil(n_el / used), k), note="one filter per possible set id"))
    rows.append(ResultRow("multiset", "planned-bits-gmi", k=k, n=n_el, n1=X, n2=used,
                          bits=gmi_planned_bits(n_el, used, k), note="sized by max(|B|, n1)"))
    return rows


RUNNERS: dict[str, Callable[[ExperimentSpec], list[ResultRow]]] = {
    "fpr-generic": run_fpr_generic,
    "fpr-mam": run_fpr_mam,
    "load-factor": run_loadfactor,
    "fpr-jmatrix": run_fpr_jmatrix,
    "batch-compare": run_batch_compare,
    "double-side": run_double_side,
    "multiset": run_multiset,
}


def run(spec: ExperimentSpec) -> list[ResultRow]:
    rows = RUNNERS[spec.experiment](spec)
    if spec.out:
        write_csv(rows, spec.out)
    return rows
