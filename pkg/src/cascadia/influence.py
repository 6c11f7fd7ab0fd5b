"""Per-comment temporal influence features.

The influence ratio compares activity right after a comment with activity
right before it; the preceding-activity vector records per-bucket counts over
the hour (by default) leading up to the comment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence

from .ingest import PostThread, count_in_range
from .urlclass import BlacklistIndex, UrlClass, UrlLabel, label_text, worst_label

NEG_INF = float("-inf")


class IrLabel(str, Enum):
    DECREASE = "decrease"
    INCREASE = "increase"


class Stage(str, Enum):
    RAPID_GROWTH = "rapidgrowth"
    SLOW_DECAY = "slowdecay"
    DORMANCY = "dormancy"


RAPID_GROWTH_END = 0.50
SLOW_DECAY_END = 0.85


@dataclass(frozen=True)
class Piv:
    delta_t_seconds: int
    components: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class IrSample:
    post_id: str
    comment_id: str
    ir: float
    label: IrLabel
    stage: Stage
    position_ratio: float
    elapsed_since_prev_seconds: Optional[int]


class IrRecord(NamedTuple):
    piv: Piv
    sample: IrSample
    url_label: UrlLabel


def _text_activity(thread: PostThread, comment_id: str):
    a = thread.get(comment_id)
    if not a.is_text:
        raise KeyError(f"post {thread.post_id}: {comment_id!r} is not a comment or reply")
    return a


def window_counts(thread: PostThread, comment_id: str, delta_t_seconds: int) -> tuple[int, int]:
    """``(up, prev)``: activity after the comment (itself excluded) and before it (itself included)."""
    if delta_t_seconds < 1:
        raise ValueError("delta_t_seconds must be positive")
    t = _text_activity(thread, comment_id).timestamp
    up = count_in_range(thread, t, t + delta_t_seconds) - 1
    prev = count_in_range(thread, t - delta_t_seconds, t) + 1
    return up, prev


def influence_ratio(thread: PostThread, comment_id: str, delta_t_seconds: int = 60) -> float:
    up, prev = window_counts(thread, comment_id, delta_t_seconds)
    if up == 0:
        return NEG_INF
    return math.log(up / prev)


def ir_label(ir: float) -> IrLabel:
    return IrLabel.INCREASE if ir > 0 else IrLabel.DECREASE


def compute_piv(thread: PostThread, comment_id: str, delta_t_seconds: int = 60, k: int = 60) -> Piv:
    if k < 1:
        raise ValueError("k must be positive")
    if delta_t_seconds < 1:
        raise ValueError("delta_t_seconds must be positive")
    t = _text_activity(thread, comment_id).timestamp
    comps = tuple(
        count_in_range(thread, t - i * delta_t_seconds, t - (i - 1) * delta_t_seconds)
        for i in range(1, k + 1)
    )
    return Piv(delta_t_seconds, comps)


def life_stage(position_ratio: float) -> Stage:
    if not 0.0 <= position_ratio <= 1.0:
        raise ValueError(f"position ratio {position_ratio} outside [0, 1]")
    if position_ratio < RAPID_GROWTH_END:
        return Stage.RAPID_GROWTH
    if position_ratio < SLOW_DECAY_END:
        return Stage.SLOW_DECAY
    return Stage.DORMANCY


def comment_positions(thread: PostThread) -> dict[str, tuple[int, int, Optional[int]]]:
    """``{comment_id: (rank, total, seconds since previous comment)}`` over comments and replies."""
    texts = thread.text_activities()
    out = {}
    prev_ts = None
    for rank, a in enumerate(texts, start=1):
        out[a.activity_id] = (rank, len(texts), None if prev_ts is None else a.timestamp - prev_ts)
        prev_ts = a.timestamp
    return out


def ir_sample(thread: PostThread, comment_id: str, delta_t_seconds: int = 60) -> IrSample:
    rank, total, elapsed = comment_positions(thread)[comment_id]
    ir = influence_ratio(thread, comment_id, delta_t_seconds)
    ratio = rank / total
    return IrSample(thread.post_id, comment_id, ir, ir_label(ir), life_stage(ratio), ratio, elapsed)


def url_comment_label(text: str, whitelist, index: BlacklistIndex) -> Optional[UrlLabel]:
    """Worst non-whitelist label in ``text``; None if it carries no such URL."""
    labels = [lab for lab in label_text(text, whitelist, index) if lab.cls is not UrlClass.WHITELIST]
    return worst_label(labels)


def extract_ir_dataset(
    threads: Iterable[PostThread],
    whitelist,
    index: BlacklistIndex,
    delta_t_seconds: int = 60,
    k: int = 60,
) -> list[IrRecord]:
    """One record per comment or reply carrying a non-whitelisted URL, ordered by post then rank."""
    records = []
    for thread in sorted(threads, key=lambda t: t.post_id):
        positions = None
        for a in thread.text_activities():
            if not a.text:
                continue
            label = url_comment_label(a.text, whitelist, index)
            if label is None:
                continue
            if positions is None:
                positions = comment_positions(thread)
            rank, total, elapsed = positions[a.activity_id]
            ir = influence_ratio(thread, a.activity_id, delta_t_seconds)
            ratio = rank / total
            sample = IrSample(
                thread.post_id, a.activity_id, ir, ir_label(ir), life_stage(ratio), ratio, elapsed
            )
            records.append(IrRecord(compute_piv(thread, a.activity_id, delta_t_seconds, k), sample, label))
    return records


def label_key(label: UrlLabel) -> str:
    return label.cls.value if label.category is None else f"{label.cls.value}:{label.category}"


def stage_cdfs(records: Sequence[IrRecord], by: str = "category") -> dict[str, list[tuple[float, float]]]:
    """Empirical CDF of position ratio per label group.

    ``by="category"`` groups Light/Critical records by category and keeps
    Benign as one group; ``by="class"`` groups by class only.
    """
    groups: dict[str, list[float]] = {}
    for r in records:
        key = label_key(r.url_label) if by == "category" else r.url_label.cls.value
        groups.setdefault(key, []).append(r.sample.position_ratio)
    out = {}
    for key in sorted(groups):
        xs = sorted(groups[key])
        n = len(xs)
        points = []
        for pos, x in enumerate(xs):
            if pos + 1 < n and xs[pos + 1] == x:
                continue
            points.append((x, (pos + 1) / n))
        out[key] = points
    return out


# --- dataset files -------------------------------------------------------------

IR_COLUMNS = (
    "post_id", "comment_id", "label_class", "label_category", "ir", "ir_label",
    "stage", "position_ratio", "elapsed_prev_s",
)


def fmt_float(x: float) -> str:
    """Six significant digits; infinities spelled ``inf``/``-inf``."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def write_ir_dataset(records: Sequence[IrRecord], fh, k: Optional[int] = None) -> None:
    if k is None:
        k = records[0].piv.k if records else 60
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(list(IR_COLUMNS) + [f"p{i}" for i in range(1, k + 1)])
    for r in records:
        s = r.sample
        if r.piv.k != k:
            raise ValueError("all records must share one PIV length")
        w.writerow([
            s.post_id, s.comment_id, r.url_label.cls.value, r.url_label.category or "",
            fmt_float(s.ir), s.label.value, s.stage.value, fmt_float(s.position_ratio),
            "" if s.elapsed_since_prev_seconds is None else s.elapsed_since_prev_seconds,
        ] + list(r.piv.components))


def read_ir_dataset(path, delta_t_seconds: int = 60) -> list[IrRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[: len(IR_COLUMNS)]) != IR_COLUMNS:
            raise ValueError(f"{path}: not an IR dataset (bad header)")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            (post_id, comment_id, cls, cat, ir, lab, stage, ratio, elapsed) = row[: len(IR_COLUMNS)]
            sample = IrSample(
                post_id, comment_id, float(ir), IrLabel(lab), Stage(stage), float(ratio),
                int(elapsed) if elapsed else None,
            )
            piv = Piv(delta_t_seconds, tuple(int(v) for v in row[len(IR_COLUMNS):]))
            records.append(IrRecord(piv, sample, UrlLabel(UrlClass(cls), cat or None)))
    return records
