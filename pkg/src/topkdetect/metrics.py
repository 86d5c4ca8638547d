"""Scoring a returned list against the true in-degree ranking.

A returned entity can be credited for rank ``j`` when its true in-degree is
at least ``F_j``, so entities tied at a rank boundary are interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricReport:
    fraction_topk: float
    first_error_index: int
    k: int
    n2: int


def _true_degrees(result, truth) -> np.ndarray:
    ids = np.asarray(getattr(result, "ids", result), dtype=np.int64)
    return truth.in_degree[ids]


def _check_rank(r: int, truth, name: str) -> None:
    if not 1 <= r <= truth.k:
        raise ValueError(f"{name}={r} outside [1, {truth.k}]")


def _coverage(result, truth, depth: int) -> np.ndarray:
    """``#{returned: degree >= F_i}`` for ``i = 1..depth``."""
    deg = np.sort(_true_degrees(result, truth))
    return len(deg) - np.searchsorted(deg, truth.order_stats[:depth], side="left")


def fraction_correct(result, truth, k: int) -> float:
    """Share of the top-k ranks that returned entities can be credited to.

    Rank ``j`` accepts any entity of degree ``>= F_j``.  These sets are
    nested, so the largest one-to-one crediting leaves
    ``max_j (j - #{returned: degree >= F_j})`` ranks uncovered.
    """
    _check_rank(k, truth, "k")
    shortfall = np.arange(1, k + 1) - _coverage(result, truth, k)
    return (k - max(0, int(shortfall.max()))) / k


def first_error(result, truth, n2: int) -> int:
    """Smallest ``i <= n2`` with fewer than ``i`` returned entities of degree
    ``>= F_i``; ``n2 + 1`` when there is none."""
    _check_rank(n2, truth, "n2")
    bad = np.flatnonzero(_coverage(result, truth, n2) < np.arange(1, n2 + 1))
    return int(bad[0]) + 1 if len(bad) else n2 + 1


def evaluate(result, truth, k: int, n2: int) -> MetricReport:
    return MetricReport(fraction_correct(result, truth, k), first_error(result, truth, n2), k, n2)


def aggregate(values) -> tuple[float, float]:
    """Sample mean and standard deviation (n-1 denominator; 0 for one value)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        raise ValueError("nothing to aggregate")
    sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), sd


def aggregate_reports(reports) -> dict:
    reports = list(reports)
    f_mean, f_sd = aggregate([r.fraction_topk for r in reports])
    e_mean, e_sd = aggregate([r.first_error_index for r in reports])
    return {"fraction_mean": f_mean, "fraction_sd": f_sd,
            "first_error_mean": e_mean, "first_error_sd": e_sd, "runs": len(reports)}
