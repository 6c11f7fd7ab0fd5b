"""Activity-stream parsing and the counting primitives shared by every stage.

Input is line-delimited JSON. Two record types are accepted::

    {"type": "post", "post_id": ..., "page_id": ..., "created_at": ...}
    {"type": "activity", "post_id": ..., "activity_id": ..., "kind": ...,
     "reaction_kind": ..., "actor_id": ..., "timestamp": ...,
     "parent_id": ..., "text": ...}

Records may appear in any order; threads are assembled and sorted here.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import IO, Iterable, Iterator, Optional, Union


class Kind(str, Enum):
    COMMENT = "comment"
    REPLY = "reply"
    REACTION = "reaction"


class ReactionKind(str, Enum):
    LIKE = "like"
    LOVE = "love"
    HAHA = "haha"
    WOW = "wow"
    SAD = "sad"
    ANGRY = "angry"


TEXT_KINDS = (Kind.COMMENT, Kind.REPLY)


class ParseError(ValueError):
    """Malformed or inconsistent input; ``lineno`` is 1-based (0 if unknown)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class Activity:
    activity_id: str
    kind: Kind
    actor_id: str
    timestamp: int
    reaction_kind: Optional[ReactionKind] = None
    parent_id: Optional[str] = None
    text: Optional[str] = None

    def __post_init__(self):
        if (self.reaction_kind is not None) != (self.kind is Kind.REACTION):
            raise ValueError(
                f"activity {self.activity_id}: reaction_kind must be set iff kind is reaction"
            )
        if self.kind is Kind.REACTION and self.text is not None:
            raise ValueError(f"activity {self.activity_id}: reactions carry no text")

    @property
    def is_text(self) -> bool:
        return self.kind in TEXT_KINDS

    def sort_key(self) -> tuple[int, str]:
        return (self.timestamp, self.activity_id)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval ``[start, end)`` in epoch seconds."""

    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty time window [{self.start}, {self.end})")


@dataclass(frozen=True)
class PostThread:
    post_id: str
    page_id: str
    created_at: int
    activities: tuple[Activity, ...] = field(default_factory=tuple)

    def __post_init__(self):
        acts = tuple(sorted(self.activities, key=Activity.sort_key))
        object.__setattr__(self, "activities", acts)
        seen = set()
        for a in acts:
            if a.activity_id in seen:
                raise ValueError(f"post {self.post_id}: duplicate activity_id {a.activity_id}")
            seen.add(a.activity_id)
            if a.timestamp < self.created_at:
                raise ValueError(
                    f"post {self.post_id}: activity {a.activity_id} precedes post creation"
                )

    # Sorted timestamp arrays back every count with a bisect.
    @cached_property
    def _all_times(self) -> list[int]:
        return [a.timestamp for a in self.activities]

    @cached_property
    def _comment_times(self) -> list[int]:
        return [a.timestamp for a in self.activities if a.kind is Kind.COMMENT]

    @cached_property
    def _index(self) -> dict[str, int]:
        return {a.activity_id: n for n, a in enumerate(self.activities)}

    def get(self, activity_id: str) -> Activity:
        try:
            return self.activities[self._index[activity_id]]
        except KeyError:
            raise KeyError(f"post {self.post_id}: unknown activity {activity_id!r}") from None

    def text_activities(self) -> list[Activity]:
        return [a for a in self.activities if a.is_text]

    def shifted(self, seconds: int) -> "PostThread":
        """Copy of the thread with every timestamp moved by ``seconds``."""
        acts = tuple(
            Activity(
                a.activity_id, a.kind, a.actor_id, a.timestamp + seconds,
                a.reaction_kind, a.parent_id, a.text,
            )
            for a in self.activities
        )
        return PostThread(self.post_id, self.page_id, self.created_at + seconds, acts)


def count_in_range(thread: PostThread, start: int, end: int) -> int:
    """Activities of every kind with ``start <= timestamp < end``."""
    if end <= start:
        return 0
    times = thread._all_times
    return bisect.bisect_left(times, end) - bisect.bisect_left(times, start)


def count_activities(thread: PostThread, window: TimeWindow) -> int:
    return count_in_range(thread, window.start, window.end)


def n_comment(thread: PostThread, minutes: Optional[int]) -> int:
    """Top-level comments posted before ``created_at + minutes*60``.

    ``minutes=None`` counts every comment in the thread (the "as crawled"
    final size). Replies are not counted.
    """
    times = thread._comment_times
    if minutes is None:
        return len(times)
    if minutes < 0:
        raise ValueError("minutes must be non-negative")
    return bisect.bisect_left(times, thread.created_at + minutes * 60)


def acc_n_comment(thread: PostThread, i: int, window_minutes: int) -> int:
    """Comments that arrived during the ``i``-th window (1-based)."""
    if i < 1:
        raise ValueError("window index starts at 1")
    if window_minutes < 1:
        raise ValueError("window_minutes must be positive")
    return n_comment(thread, i * window_minutes) - n_comment(thread, (i - 1) * window_minutes)


# --- parsing -----------------------------------------------------------------

_POST_FIELDS = ("post_id", "page_id", "created_at")
_ACTIVITY_FIELDS = ("post_id", "activity_id", "kind", "actor_id", "timestamp")


def _require_str(rec: dict, key: str, lineno: int) -> str:
    v = rec[key]
    if not isinstance(v, str) or not v:
        raise ParseError(f"field {key!r} must be a non-empty string", lineno)
    return v


def _require_int(rec: dict, key: str, lineno: int) -> int:
    v = rec[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"field {key!r} must be an integer", lineno)
    return v


def _activity_from_record(rec: dict, lineno: int) -> Activity:
    for key in _ACTIVITY_FIELDS:
        if key not in rec:
            raise ParseError(f"activity record missing {key!r}", lineno)
    try:
        kind = Kind(rec["kind"])
    except ValueError:
        raise ParseError(f"unknown kind {rec['kind']!r}", lineno) from None
    rk = rec.get("reaction_kind")
    if rk is not None:
        try:
            rk = ReactionKind(rk)
        except ValueError:
            raise ParseError(f"unknown reaction_kind {rk!r}", lineno) from None
    text = rec.get("text")
    if text is not None and not isinstance(text, str):
        raise ParseError("field 'text' must be a string", lineno)
    if kind in TEXT_KINDS and text is None:
        text = ""
    parent = rec.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        raise ParseError("field 'parent_id' must be a string", lineno)
    try:
        return Activity(
            activity_id=_require_str(rec, "activity_id", lineno),
            kind=kind,
            actor_id=_require_str(rec, "actor_id", lineno),
            timestamp=_require_int(rec, "timestamp", lineno),
            reaction_kind=rk,
            parent_id=parent,
            text=text,
        )
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), lineno) from None


def iter_records(lines: Iterable[Union[str, bytes]]) -> Iterator[tuple[int, dict]]:
    for lineno, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise ParseError("invalid UTF-8", lineno) from None
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("record is not an object", lineno)
        yield lineno, rec


def parse_thread_file(stream: Union[IO[bytes], IO[str], Iterable]) -> list[PostThread]:
    """Parse a line-delimited record stream into threads, in file order of posts."""
    posts: dict[str, tuple[str, int, int]] = {}
    activities: dict[str, list[tuple[int, Activity]]] = {}
    for lineno, rec in iter_records(stream):
        rtype = rec.get("type")
        if rtype == "post":
            for key in _POST_FIELDS:
                if key not in rec:
                    raise ParseError(f"post record missing {key!r}", lineno)
            pid = _require_str(rec, "post_id", lineno)
            if pid in posts:
                raise ParseError(f"duplicate post {pid!r}", lineno)
            posts[pid] = (
                _require_str(rec, "page_id", lineno),
                _require_int(rec, "created_at", lineno),
                lineno,
            )
        elif rtype == "activity":
            act = _activity_from_record(rec, lineno)
            activities.setdefault(_require_str(rec, "post_id", lineno), []).append((lineno, act))
        else:
            raise ParseError(f"unknown record type {rtype!r}", lineno)

    for pid, acts in activities.items():
        if pid not in posts:
            raise ParseError(f"activity references unknown post {pid!r}", acts[0][0])

    threads = []
    for pid, (page_id, created_at, post_line) in posts.items():
        acts = activities.get(pid, [])
        seen: dict[str, int] = {}
        for lineno, a in acts:
            if a.activity_id in seen:
                raise ParseError(
                    f"duplicate activity_id {a.activity_id!r} in post {pid!r}", lineno
                )
            seen[a.activity_id] = lineno
            if a.timestamp < created_at:
                raise ParseError(
                    f"activity {a.activity_id!r} is earlier than post {pid!r}", lineno
                )
        threads.append(PostThread(pid, page_id, created_at, tuple(a for _, a in acts)))
    return threads


def load_threads(path) -> list[PostThread]:
    with open(path, "rb") as fh:
        return parse_thread_file(fh)


def thread_records(thread: PostThread) -> Iterator[dict]:
    yield {
        "type": "post",
        "post_id": thread.post_id,
        "page_id": thread.page_id,
        "created_at": thread.created_at,
    }
    for a in thread.activities:
        rec = {
            "type": "activity",
            "post_id": thread.post_id,
            "activity_id": a.activity_id,
            "kind": a.kind.value,
        }
        if a.reaction_kind is not None:
            rec["reaction_kind"] = a.reaction_kind.value
        rec["actor_id"] = a.actor_id
        rec["timestamp"] = a.timestamp
        if a.parent_id is not None:
            rec["parent_id"] = a.parent_id
        if a.text is not None:
            rec["text"] = a.text
        yield rec


def dump_threads(threads: Iterable[PostThread], fh: IO[str]) -> None:
    for t in threads:
        for rec in thread_records(t):
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")
