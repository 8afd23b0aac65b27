"""Standard errors for Monte Carlo rate estimates."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def binomial_se(p: float, n: int) -> float:
    """Standard error of a rate ``p`` estimated from ``n`` Bernoulli trials."""
    if n < 1:
        raise ValueError("need at least one trial")
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def pooled_se(hits1: int, n1: int, hits2: int, n2: int) -> float:
    """Standard error of the difference of two rates under a common rate."""
    p = (hits1 + hits2) / (n1 + n2)
    return math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))


def mean_and_se(rates: Sequence[float]) -> tuple[float, float]:
    """Mean of per-trial rates and its between-trial standard error.

    Captures build-to-build variation (hash draws, dataset draws) that a
    binomial error on the pooled queries would miss.
    """
    r = np.asarray(rates, dtype=float)
    if len(r) < 2:
        return float(r.mean()) if len(r) else float("nan"), float("nan")
    return float(r.mean()), float(r.std(ddof=1) / math.sqrt(len(r)))


def within(observed: float, expected: float, se: float, z: float = 3.0) -> bool:
    return abs(observed - expected) <= z * se
