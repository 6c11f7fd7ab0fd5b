"""Two-sample Kolmogorov-Smirnov test and cascade-size summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ingest import PostThread, n_comment

_SERIES_TOL = 1e-12


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    p_value: float
    n1: int
    n2: int


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    dispersion: float  # sample standard deviation (n-1); 0 when n == 1
    min: float
    max: float


def kolmogorov_sf(lam: float) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution.

    Uses the alternating series for lam >= 1 and the theta-function form
    (which converges fast for small lam) below it; both are truncated once
    a term drops under 1e-12.
    """
    if lam <= 0:
        return 1.0
    if lam >= 1.0:
        total, k = 0.0, 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += term if k % 2 else -term
            if term < _SERIES_TOL:
                break
            k += 1
        p = 2.0 * total
    else:
        s, k = 0.0, 1
        c = math.pi * math.pi / (8.0 * lam * lam)
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < _SERIES_TOL:
                break
            k += 1
        p = 1.0 - math.sqrt(2.0 * math.pi) / lam * s
    return min(1.0, max(0.0, p))


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact sup |ECDF_a - ECDF_b| over the pooled sample, computed on integer counts."""
    xa = np.sort(np.asarray(a, dtype=float))
    xb = np.sort(np.asarray(b, dtype=float))
    n1, n2 = len(xa), len(xb)
    pooled = np.concatenate([xa, xb])
    ca = np.searchsorted(xa, pooled, side="right").astype(np.int64)
    cb = np.searchsorted(xb, pooled, side="right").astype(np.int64)
    # Integer numerators keep ties and equal ECDF steps exact.
    diff = int(np.abs(ca * n2 - cb * n1).max())
    return diff / (n1 * n2)


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KsResult:
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    d = ks_statistic(a, b)
    n1, n2 = len(a), len(b)
    lam = math.sqrt(n1 * n2 / (n1 + n2)) * d
    return KsResult(d, kolmogorov_sf(lam), n1, n2)


def summary_stats(samples: Sequence[float]) -> SummaryStats:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("summary of an empty sample")
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return SummaryStats(int(x.size), float(x.mean()), sd, float(x.min()), float(x.max()))


def final_sizes(threads: Sequence[PostThread], final_minutes: Optional[int]) -> list[int]:
    return [n_comment(t, final_minutes) for t in threads]


def compare_cascades(
    targets: Sequence[PostThread],
    nontargets: Sequence[PostThread],
    final_minutes: Optional[int] = None,
) -> tuple[SummaryStats, SummaryStats, KsResult]:
    if not targets or not nontargets:
        raise ValueError("need at least one target and one non-target thread")
    ft = final_sizes(targets, final_minutes)
    fn = final_sizes(nontargets, final_minutes)
    return summary_stats(ft), summary_stats(fn), ks_two_sample(ft, fn)
