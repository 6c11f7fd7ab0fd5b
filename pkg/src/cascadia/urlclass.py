"""URL extraction and Whitelist / Light / Critical / Benign labeling.

Blacklists use the Shalla/squidGuard layout: one directory per category
holding a ``domains`` file. Only the categories in ``CATEGORY_CLASS`` are
loaded; everything else on disk is ignored (its hosts end up Benign).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .ingest import PostThread


class UrlClass(str, Enum):
    WHITELIST = "whitelist"
    LIGHT = "light"
    CRITICAL = "critical"
    BENIGN = "benign"


LIGHT_CATEGORIES = ("advertising", "shopping", "gamble", "porn")
CRITICAL_CATEGORIES = (
    "download", "hacking", "spyware", "aggressive", "drugs", "weapons", "violence",
)
CATEGORY_CLASS = {
    **{c: UrlClass.LIGHT for c in LIGHT_CATEGORIES},
    **{c: UrlClass.CRITICAL for c in CRITICAL_CATEGORIES},
}

# Severity used whenever several labels compete for one comment or thread.
SEVERITY = {UrlClass.WHITELIST: 0, UrlClass.BENIGN: 1, UrlClass.LIGHT: 2, UrlClass.CRITICAL: 3}


@dataclass(frozen=True)
class UrlLabel:
    cls: UrlClass
    category: Optional[str] = None

    def __post_init__(self):
        if self.cls in (UrlClass.LIGHT, UrlClass.CRITICAL):
            if self.category is None or CATEGORY_CLASS.get(self.category) is not self.cls:
                raise ValueError(f"{self.cls.value} label needs a matching category, got {self.category!r}")
        elif self.category is not None:
            raise ValueError(f"{self.cls.value} label takes no category")

    def __str__(self):
        return self.cls.value if self.category is None else f"{self.cls.value}({self.category})"


WHITELIST_LABEL = UrlLabel(UrlClass.WHITELIST)
BENIGN_LABEL = UrlLabel(UrlClass.BENIGN)


class ThreadValue(str, Enum):
    TARGET = "target"
    NONTARGET = "nontarget"


@dataclass(frozen=True)
class ThreadLabel:
    worst: Optional[UrlClass]  # None, LIGHT or CRITICAL

    @property
    def value(self) -> ThreadValue:
        return ThreadValue.NONTARGET if self.worst is None else ThreadValue.TARGET

    @property
    def is_target(self) -> bool:
        return self.worst is not None


@dataclass(frozen=True)
class BlacklistIndex:
    host_to_category: dict[str, str] = field(default_factory=dict)

    @property
    def category_to_class(self) -> dict[str, UrlClass]:
        return dict(CATEGORY_CLASS)

    def lookup(self, host: str) -> Optional[str]:
        """Category of the longest listed suffix of ``host`` (exact host first)."""
        labels = host.split(".")
        for n in range(len(labels) - 1):
            cat = self.host_to_category.get(".".join(labels[n:]))
            if cat is not None:
                return cat
        # Bare TLD entries are never meaningful; only the full host may be single-label.
        if len(labels) == 1:
            return self.host_to_category.get(host)
        return None

    @classmethod
    def from_mapping(cls, categories: dict[str, Iterable[str]]) -> "BlacklistIndex":
        """Build from ``{category: hosts}``; unknown categories are skipped.

        A host listed under several categories keeps the most severe one
        (Critical over Light), then the alphabetically first.
        """
        index: dict[str, str] = {}
        for cat in sorted(categories):
            if cat not in CATEGORY_CLASS:
                continue
            for raw in categories[cat]:
                host = _clean_list_entry(raw)
                if not host:
                    continue
                prev = index.get(host)
                if prev is None or SEVERITY[CATEGORY_CLASS[cat]] > SEVERITY[CATEGORY_CLASS[prev]]:
                    index[host] = cat
        return cls(index)

    @classmethod
    def load(cls, directory) -> "BlacklistIndex":
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"blacklist directory not found: {directory}")
        cats = {}
        for entry in sorted(os.listdir(directory)):
            dom = directory / entry / "domains"
            if entry.lower() in CATEGORY_CLASS and dom.is_file():
                cats[entry.lower()] = dom.read_text(encoding="utf-8", errors="replace").splitlines()
        return cls.from_mapping(cats)


def _clean_list_entry(line: str) -> str:
    line = line.split("#", 1)[0].strip().lower()
    if not line:
        return ""
    if "://" in line:
        line = line.split("://", 1)[1]
    line = line.split("/", 1)[0].rstrip(".")
    if line.startswith("www."):
        line = line[4:]
    return line


def load_whitelist(path) -> frozenset[str]:
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        entry = _clean_list_entry(line)
        if entry:
            entries.add(entry)
    return frozenset(entries)


def default_blacklist_dir() -> Path:
    return Path(str(resources.files("cascadia") / "data" / "blacklist"))


def default_whitelist_file() -> Path:
    return Path(str(resources.files("cascadia") / "data" / "whitelist.txt"))


# --- extraction --------------------------------------------------------------

_SCHEMES = ("http://", "https://")
# Characters that close a URL in running text besides whitespace.
CLOSING_DELIMITERS = frozenset("()[]{}<>\"'`|\\^")


def extract_urls(text: str) -> list[str]:
    """Every maximal ``http(s)://`` run, in order of appearance, duplicates kept."""
    urls = []
    lower = text.lower()
    n = len(text)
    pos = 0
    while pos < n:
        starts = [s for s in (lower.find(sc, pos) for sc in _SCHEMES) if s >= 0]
        if not starts:
            break
        start = min(starts)
        end = start
        while end < n and not text[end].isspace() and text[end] not in CLOSING_DELIMITERS:
            end += 1
        scheme_len = 8 if lower.startswith("https://", start) else 7
        if end > start + scheme_len:
            urls.append(text[start:end])
            pos = end
        else:
            pos = start + scheme_len
    return urls


def normalize_host(url: str) -> str:
    lower = url.lower()
    for sc in _SCHEMES:
        if lower.startswith(sc):
            rest = url[len(sc):]
            break
    else:
        raise ValueError(f"not an http(s) URL: {url!r}")
    authority = rest
    for sep in "/?#":
        authority = authority.split(sep, 1)[0]
    authority = authority.rsplit("@", 1)[-1]
    if authority.startswith("["):
        host = authority.split("]", 1)[0] + "]"
    else:
        host = authority.split(":", 1)[0]
    host = host.lower().rstrip(".")
    if host.startswith("www."):
        host = host[4:]
    if not host:
        raise ValueError(f"empty authority in {url!r}")
    return host


def whitelisted(host: str, whitelist: Iterable[str]) -> bool:
    """True when some entry's labels occur as a contiguous label run of ``host``.

    Covers exact and suffix matches ("m.facebook.com" vs "facebook.com") and
    the partial entries common in hand-made lists ("twitter", "en.wikipedia").
    """
    padded = f".{host}."
    for entry in whitelist:
        if host == entry or host.endswith("." + entry) or f".{entry}." in padded:
            return True
    return False


def classify_url(host: str, whitelist: Iterable[str], index: BlacklistIndex) -> UrlLabel:
    if whitelisted(host, whitelist):
        return WHITELIST_LABEL
    cat = index.lookup(host)
    if cat is not None:
        return UrlLabel(CATEGORY_CLASS[cat], cat)
    return BENIGN_LABEL


def label_text(text: str, whitelist, index: BlacklistIndex) -> list[UrlLabel]:
    """Labels for every well-formed URL in ``text``; malformed ones are skipped."""
    labels = []
    for url in extract_urls(text):
        try:
            host = normalize_host(url)
        except ValueError:
            continue
        labels.append(classify_url(host, whitelist, index))
    return labels


def worst_label(labels: Iterable[UrlLabel]) -> Optional[UrlLabel]:
    """Most severe label; first occurrence wins among equals. None if empty."""
    best = None
    for lab in labels:
        if best is None or SEVERITY[lab.cls] > SEVERITY[best.cls]:
            best = lab
    return best


def label_thread(thread: PostThread, whitelist, index: BlacklistIndex) -> ThreadLabel:
    worst = None
    for a in thread.activities:
        if not a.is_text or not a.text:
            continue
        for lab in label_text(a.text, whitelist, index):
            if lab.cls is UrlClass.CRITICAL:
                return ThreadLabel(UrlClass.CRITICAL)
            if lab.cls is UrlClass.LIGHT:
                worst = UrlClass.LIGHT
    return ThreadLabel(worst)


def split_targets(threads, whitelist, index) -> tuple[list[PostThread], list[PostThread]]:
    targets, nontargets = [], []
    for t in threads:
        (targets if label_thread(t, whitelist, index).is_target else nontargets).append(t)
    return targets, nontargets
