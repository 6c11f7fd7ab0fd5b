"""Bandwagon cascade-size machinery.

A thread's early trajectory is summarised per time window; threads that
reach the same comment count at the same window form one cell of the
distribution matrix, and the prediction matrix stores a bootstrap lower
bound on the final size of every cell.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .fileio import atomic_write_text
from .ingest import PostThread, acc_n_comment, n_comment

Cell = tuple[int, int]
SeedLike = Union[int, Sequence[int]]


@dataclass(frozen=True)
class Dav:
    window_minutes: int
    values: tuple[int, ...]

    @property
    def horizon_minutes(self) -> int:
        return self.window_minutes * len(self.values)


@dataclass(frozen=True)
class DistributionMatrix:
    window_minutes: int
    horizon_minutes: int
    final_minutes: Optional[int]
    cells: dict[Cell, tuple[int, ...]] = field(default_factory=dict)

    @property
    def n_windows(self) -> int:
        return self.horizon_minutes // self.window_minutes

    def cardinality(self) -> int:
        return sum(len(v) for v in self.cells.values())

    def merge(self, other: "DistributionMatrix") -> "DistributionMatrix":
        if (self.window_minutes, self.horizon_minutes, self.final_minutes) != (
            other.window_minutes, other.horizon_minutes, other.final_minutes,
        ):
            raise ValueError("cannot merge matrices built with different windows")
        merged: dict[Cell, list[int]] = defaultdict(list)
        for src in (self.cells, other.cells):
            for key, vals in src.items():
                merged[key].extend(vals)
        cells = {k: tuple(sorted(v)) for k, v in sorted(merged.items())}
        return DistributionMatrix(self.window_minutes, self.horizon_minutes, self.final_minutes, cells)


@dataclass(frozen=True)
class PredictionMatrix:
    window_minutes: int
    horizon_minutes: int
    resamples: int
    percentile: float
    seed: int
    cells: dict[Cell, int] = field(default_factory=dict)
    final_minutes: Optional[int] = None

    def provenance(self) -> dict:
        return {
            "window_minutes": self.window_minutes,
            "horizon_minutes": self.horizon_minutes,
            "final_minutes": self.final_minutes,
            "resamples": self.resamples,
            "percentile": self.percentile,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CascadeCV:
    precision_hits: int
    predictable: int
    total: int

    @property
    def precision(self) -> float:
        return self.precision_hits / self.predictable if self.predictable else 0.0

    @property
    def predictable_rate(self) -> float:
        return self.predictable / self.total if self.total else 0.0


def _n_windows(window_minutes: int, horizon_minutes: int) -> int:
    if window_minutes < 1 or horizon_minutes < 1:
        raise ValueError("window and horizon must be positive")
    if horizon_minutes % window_minutes:
        raise ValueError(
            f"horizon {horizon_minutes} min is not a multiple of the {window_minutes} min window"
        )
    return horizon_minutes // window_minutes


def compute_dav(thread: PostThread, window_minutes: int, horizon_minutes: int) -> Dav:
    n = _n_windows(window_minutes, horizon_minutes)
    return Dav(window_minutes, tuple(acc_n_comment(thread, i, window_minutes) for i in range(1, n + 1)))


def build_distribution_matrix(
    threads: Iterable[PostThread],
    window_minutes: int,
    horizon_minutes: int,
    final_minutes: Optional[int],
) -> DistributionMatrix:
    """Cell ``(i, j)`` collects the final size of every thread with ``j`` comments after window ``i``.

    ``final_minutes=None`` measures the final size as every comment in the thread.
    """
    n = _n_windows(window_minutes, horizon_minutes)
    if final_minutes is not None and final_minutes < horizon_minutes:
        raise ValueError("final_minutes must be at least horizon_minutes")
    cells: dict[Cell, list[int]] = defaultdict(list)
    for t in threads:
        final = n_comment(t, final_minutes)
        for i in range(1, n + 1):
            cells[(i, n_comment(t, i * window_minutes))].append(final)
    frozen = {k: tuple(sorted(v)) for k, v in sorted(cells.items())}
    return DistributionMatrix(window_minutes, horizon_minutes, final_minutes, frozen)


def _nearest_rank(total: int, percentile: float) -> int:
    if not 0 < percentile < 100:
        raise ValueError("percentile must lie strictly between 0 and 100")
    return max(1, math.ceil(Fraction(percentile) * total / 100))


def bootstrap_lower_bound(
    samples: Sequence[int], resamples: int, percentile: float, seed: SeedLike
) -> int:
    """Nearest-rank ``percentile`` of the minima of ``resamples`` bootstrap resamples."""
    if len(samples) == 0:
        raise ValueError("bootstrap needs at least one sample")
    if resamples < 1:
        raise ValueError("resamples must be positive")
    rank = _nearest_rank(resamples, percentile)
    ordered = np.sort(np.asarray(samples, dtype=np.int64))
    n = len(ordered)
    if ordered[0] == ordered[-1]:
        return int(ordered[0])
    rng = np.random.default_rng(seed)
    # The minimum of a resample is the sorted sample at its smallest drawn index.
    idx = rng.integers(0, n, size=(resamples, n)).min(axis=1)
    minima = np.sort(ordered[idx])
    return int(minima[rank - 1])


def exact_bootstrap_lower_bound(samples: Sequence[int], percentile: float) -> int:
    """The same statistic over all ``n**n`` ordered resamples, computed in closed form.

    P(min > v) = (#samples > v / n) ** n, so the count of resamples whose
    minimum is <= v is ``n**n - above**n``.
    """
    if len(samples) == 0:
        raise ValueError("bootstrap needs at least one sample")
    ordered = sorted(samples)
    n = len(ordered)
    total = n ** n
    rank = _nearest_rank(total, percentile)
    for pos, v in enumerate(ordered):
        if pos + 1 < n and ordered[pos + 1] == v:
            continue
        above = n - pos - 1
        if total - above ** n >= rank:
            return v
    return ordered[-1]


def _bound_chunk(args):
    chunk, resamples, percentile, seed = args
    return [
        (key, bootstrap_lower_bound(vals, resamples, percentile, [seed, key[0], key[1]]))
        for key, vals in chunk
    ]


def build_prediction_matrix(
    d: DistributionMatrix,
    resamples: int = 1000,
    percentile: float = 50,
    seed: int = 0,
    workers: int = 1,
) -> PredictionMatrix:
    """Bootstrap every non-empty cell. Per-cell seeds mix ``seed`` with the cell key,
    so results do not depend on ``workers``."""
    items = [(k, v) for k, v in d.cells.items() if v]
    if workers > 1 and len(items) > 64:
        chunks = [items[n::workers] for n in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_bound_chunk, [(c, resamples, percentile, seed) for c in chunks])
            pairs = [p for part in parts for p in part]
    else:
        pairs = _bound_chunk((items, resamples, percentile, seed))
    cells = dict(sorted(pairs))
    return PredictionMatrix(
        d.window_minutes, d.horizon_minutes, resamples, percentile, seed, cells, d.final_minutes
    )


def predict_final(m: PredictionMatrix, observed_minutes: int, observed_comment_count: int) -> Optional[int]:
    """Lower bound on the final size, or None when the cell was never observed."""
    if observed_minutes < 1 or observed_minutes % m.window_minutes:
        raise ValueError(
            f"observed time {observed_minutes} min does not align to {m.window_minutes} min windows"
        )
    return m.cells.get((observed_minutes // m.window_minutes, observed_comment_count))


def cross_validate(
    train: Sequence[PostThread],
    test: Sequence[PostThread],
    window_minutes: int = 5,
    horizon_minutes: int = 120,
    final_minutes: Optional[int] = None,
    resamples: int = 1000,
    percentile: float = 50,
    seed: int = 0,
    workers: int = 1,
) -> CascadeCV:
    d = build_distribution_matrix(train, window_minutes, horizon_minutes, final_minutes)
    m = build_prediction_matrix(d, resamples, percentile, seed, workers)
    hits = predictable = 0
    for t in test:
        bound = predict_final(m, horizon_minutes, n_comment(t, horizon_minutes))
        if bound is None:
            continue
        predictable += 1
        if n_comment(t, final_minutes) >= bound:
            hits += 1
    return CascadeCV(hits, predictable, len(test))


# --- serialization -------------------------------------------------------------

def write_prediction_matrix(m: PredictionMatrix, path) -> Path:
    """CSV ``i,j,bound`` plus a ``<path>.meta.json`` provenance sidecar."""
    path = Path(path)
    meta = path.with_name(path.name + ".meta.json")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "bound"])
    for (i, j), bound in sorted(m.cells.items()):
        w.writerow([i, j, bound])
    atomic_write_text(meta, json.dumps(m.provenance(), indent=2, sort_keys=True) + "\n")
    atomic_write_text(path, buf.getvalue())
    return meta


def read_prediction_matrix(path) -> PredictionMatrix:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".meta.json").read_text())
    cells = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["i", "j", "bound"]:
            raise ValueError(f"{path}: expected header i,j,bound")
        for row in reader:
            cells[(int(row["i"]), int(row["j"]))] = int(row["bound"])
    return PredictionMatrix(
        int(meta["window_minutes"]),
        int(meta["horizon_minutes"]),
        int(meta["resamples"]),
        meta["percentile"],
        int(meta["seed"]),
        cells,
        meta.get("final_minutes"),
    )
