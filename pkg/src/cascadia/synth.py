"""Deterministic synthetic discussion threads with planted URL comments.

Comment arrivals follow a self-exciting process whose base rate decays
exponentially after the post is created::

    lambda(t) = mu * exp(-t / tau) + sum_{t_e < t} alpha * exp(-(t - t_e) / omega)

(minutes since creation), simulated exactly by thinning. Every comment draws
reactions as a Poisson process over the following ten minutes. Planted
comments carry a URL of a requested label and sit at a uniformly chosen rank
inside a requested life-cycle stage.

With ``ir_regimes = boost, suppress`` each plant also gets an intended
direction. A plant arriving in a lull (its last minute no busier than its
preceding hour on average) is an Increase plant, and the comment intensity
over the next window is multiplied by ``boost`` (the surplus arrives as
reactions to the plant). Any other plant is a Decrease plant and activity in
its next window is thinned to a ``suppress`` fraction; thinned comments are
pushed one window later so that every plant keeps its rank.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fileio import atomic_open
from .influence import IrLabel, Stage, life_stage
from .ingest import Activity, Kind, PostThread, ReactionKind, dump_threads
from .urlclass import CATEGORY_CLASS, UrlClass, UrlLabel, default_blacklist_dir

REACTION_WINDOW_MIN = 10.0
REACTION_WEIGHTS = {
    ReactionKind.LIKE: 0.70, ReactionKind.LOVE: 0.10, ReactionKind.HAHA: 0.07,
    ReactionKind.WOW: 0.04, ReactionKind.SAD: 0.04, ReactionKind.ANGRY: 0.05,
}
FILLER = (
    "interesting read", "I disagree with this", "totally agree", "who wrote this?",
    "this is why I stopped watching", "source?", "finally someone said it",
    "lol", "so sad to hear", "great reporting", "fake news", "what a time to be alive",
)
WHITELIST_URLS = (
    "https://www.youtube.com/watch?v=dQw4w9WgXcQ", "https://en.wikipedia.org/wiki/Bandwagon_effect",
    "http://www.cnn.com/2016/01/01/politics/", "https://twitter.com/someone/status/1",
)


@dataclass(frozen=True)
class PlantSpec:
    cls: UrlClass
    category: Optional[str]
    stage: Stage
    count: int = 1
    fraction: float = 1.0  # probability that a thread receives this spec

    def __post_init__(self):
        if self.cls is UrlClass.WHITELIST:
            raise ValueError("whitelist URLs cannot be planted")
        UrlLabel(self.cls, self.category)  # validates the class/category pair
        if self.count < 0 or not 0.0 <= self.fraction <= 1.0:
            raise ValueError("plant count must be >= 0 and fraction in [0, 1]")

    @property
    def label(self) -> UrlLabel:
        return UrlLabel(self.cls, self.category)


@dataclass(frozen=True)
class SynthConfig:
    n_threads: int = 100
    base_rate: float = 2.0          # mu, comments per minute at creation
    decay: float = 20.0             # tau, minutes
    excitation: float = 0.3         # alpha, per minute
    excitation_decay: float = 2.0   # omega, minutes
    reaction_rate: float = 0.15     # reactions per minute per comment, for ten minutes
    reply_fraction: float = 0.1
    horizon: float = 240.0          # minutes simulated
    plants: tuple[PlantSpec, ...] = ()
    ir_regimes: Optional[tuple[float, float]] = None
    ir_window_s: int = 60
    lull_buckets: int = 60
    whitelist_url_rate: float = 0.0
    on_infeasible: str = "error"
    page_id: str = "synthetic"
    start_time: int = 1_420_070_400
    blacklist_dir: Optional[str] = None
    max_comments: int = 100_000     # per thread; guards against explosive excitation
    seed: int = 0

    def __post_init__(self):
        for name in ("base_rate", "excitation", "reaction_rate", "reply_fraction", "whitelist_url_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.decay <= 0 or self.excitation_decay <= 0:
            raise ValueError("decay and excitation_decay must be positive")
        if self.horizon <= 0 or self.n_threads < 0:
            raise ValueError("horizon must be positive and n_threads non-negative")
        if self.max_comments < 1:
            raise ValueError("max_comments must be positive")
        if self.ir_window_s < 1 or self.lull_buckets < 1:
            raise ValueError("ir_window_s and lull_buckets must be positive")
        if self.on_infeasible not in ("error", "skip"):
            raise ValueError("on_infeasible must be 'error' or 'skip'")
        if self.ir_regimes is not None:
            boost, suppress = self.ir_regimes
            if boost < 1 or not 0 <= suppress <= 1:
                raise ValueError("ir_regimes needs boost >= 1 and 0 <= suppress <= 1")

    def digest(self) -> str:
        return hashlib.sha256(format_config(self).encode()).hexdigest()


@dataclass(frozen=True)
class PlantTruth:
    post_id: str
    comment_id: str
    label: UrlLabel
    stage: Stage
    direction: Optional[IrLabel]


@dataclass
class SynthGroundTruth:
    targets: dict[str, bool] = field(default_factory=dict)
    plants: list[PlantTruth] = field(default_factory=list)

    def plants_for(self, post_id: str) -> list[PlantTruth]:
        return [p for p in self.plants if p.post_id == post_id]


class InfeasiblePlant(ValueError):
    pass


# --- config files -------------------------------------------------------------

_FIELD_TYPES = {
    "n_threads": int, "base_rate": float, "decay": float, "excitation": float,
    "excitation_decay": float, "reaction_rate": float, "reply_fraction": float,
    "horizon": float, "ir_window_s": int, "lull_buckets": int, "whitelist_url_rate": float,
    "on_infeasible": str, "page_id": str, "start_time": int, "blacklist_dir": str,
    "max_comments": int, "seed": int,
}


def parse_plant(value: str) -> PlantSpec:
    parts = [p.strip().lower() for p in value.split(",")]
    if len(parts) not in (4, 5):
        raise ValueError(f"plant needs class,category,stage,count[,fraction]: {value!r}")
    cls = UrlClass(parts[0])
    return PlantSpec(cls, parts[1] or None, Stage(parts[2]), int(parts[3]),
                     float(parts[4]) if len(parts) == 5 else 1.0)


def parse_config(text: str) -> SynthConfig:
    """``key = value`` lines; ``plant = class,category,stage,count[,fraction]`` may repeat."""
    kwargs: dict = {}
    plants = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ValueError(f"config line {lineno}: expected key = value")
        try:
            if key == "plant":
                plants.append(parse_plant(value))
            elif key == "ir_regimes":
                boost, suppress = (float(v) for v in value.split(","))
                kwargs[key] = (boost, suppress)
            elif key in _FIELD_TYPES:
                kwargs[key] = _FIELD_TYPES[key](value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: {exc}") from None
    return SynthConfig(plants=tuple(plants), **kwargs)


def format_config(cfg: SynthConfig) -> str:
    lines = []
    for key in _FIELD_TYPES:
        v = getattr(cfg, key)
        if v is not None:
            lines.append(f"{key} = {v}")
    if cfg.ir_regimes is not None:
        lines.append(f"ir_regimes = {cfg.ir_regimes[0]},{cfg.ir_regimes[1]}")
    for p in cfg.plants:
        lines.append(f"plant = {p.cls.value},{p.category or ''},{p.stage.value},{p.count},{p.fraction}")
    return "\n".join(lines) + "\n"


def load_config(path) -> SynthConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# --- simulation --------------------------------------------------------------------

def simulate_arrivals(rng: np.random.Generator, mu: float, tau: float, alpha: float,
                      omega: float, horizon: float, limit: Optional[int] = None) -> list[float]:
    """Arrival times (minutes) on ``[0, horizon)`` by thinning.

    Between events the intensity only decays, so its value at the current
    point dominates the rest of the step. Raises ValueError once more than
    ``limit`` events have been accepted.
    """
    times = []
    s = 0.0
    excited = 0.0
    while True:
        bound = mu * math.exp(-s / tau) + excited
        if bound <= 0.0:
            break
        w = rng.exponential(1.0 / bound)
        if s + w >= horizon:
            break
        s += w
        excited *= math.exp(-w / omega)
        lam = mu * math.exp(-s / tau) + excited
        if rng.random() * bound <= lam:
            times.append(s)
            excited += alpha
            if limit is not None and len(times) > limit:
                raise ValueError(
                    f"more than {limit} comments; excitation * excitation_decay = {alpha * omega:g} "
                    "near or above 1 makes the process explosive"
                )
    return times


def _category_hosts(blacklist_dir) -> dict[str, list[str]]:
    root = Path(blacklist_dir) if blacklist_dir else default_blacklist_dir()
    hosts = {}
    for cat in CATEGORY_CLASS:
        f = root / cat / "domains"
        if f.is_file():
            entries = [l.split("#", 1)[0].strip().lower() for l in f.read_text().splitlines()]
            entries = [e for e in entries if e]
            if entries:
                hosts[cat] = entries
    return hosts


def _plant_url(rng: np.random.Generator, label: UrlLabel, hosts: dict[str, list[str]]) -> str:
    if label.cls is UrlClass.BENIGN:
        host = f"site{int(rng.integers(0, 100000)):05d}.example"
    else:
        pool = hosts.get(label.category)
        if not pool:
            raise ValueError(f"no fixture hosts for category {label.category!r}")
        host = pool[int(rng.integers(0, len(pool)))]
        prefix = ("", "www.", "m.", "promo.")[int(rng.integers(0, 4))]
        host = prefix + host
    scheme = "https" if rng.random() < 0.5 else "http"
    return f"{scheme}://{host}/{int(rng.integers(0, 10**6)):x}"


class _Builder:
    """Mutable activity list for one thread; frozen into a PostThread at the end."""

    def __init__(self, post_id: str, created_at: int):
        self.post_id = post_id
        self.created_at = created_at
        self.acts: dict[str, dict] = {}
        self.n_reactions = 0

    def add(self, aid: str, **kw):
        self.acts[aid] = dict(activity_id=aid, **kw)

    def add_reaction(self, rng, parent: str, ts: int):
        self.n_reactions += 1
        aid = f"{self.post_id}-r{self.n_reactions:06d}"
        kinds = list(REACTION_WEIGHTS)
        kind = kinds[int(rng.choice(len(kinds), p=list(REACTION_WEIGHTS.values())))]
        self.add(aid, kind=Kind.REACTION, reaction_kind=kind, actor_id=_actor(rng),
                 timestamp=ts, parent_id=parent, text=None)

    def sorted_keys(self) -> list[tuple[int, str]]:
        return sorted((a["timestamp"], a["activity_id"]) for a in self.acts.values())

    def text_keys(self) -> list[tuple[int, str]]:
        return sorted((a["timestamp"], a["activity_id"]) for a in self.acts.values()
                      if a["kind"] is not Kind.REACTION)

    def freeze(self, page_id: str) -> PostThread:
        return PostThread(self.post_id, page_id, self.created_at,
                          tuple(Activity(**a) for a in self.acts.values()))


def _actor(rng) -> str:
    return f"u{int(rng.integers(0, 10**7)):07d}"


def _count(keys: list[tuple[int, str]], start: int, end: int) -> int:
    return bisect.bisect_left(keys, (end, "")) - bisect.bisect_left(keys, (start, ""))


def generate_thread(cfg: SynthConfig, index: int, hosts: Optional[dict] = None):
    """One thread and its plant truth, seeded by ``(seed, index)`` only."""
    rng = np.random.default_rng([cfg.seed, index])
    hosts = hosts if hosts is not None else _category_hosts(cfg.blacklist_dir)
    post_id = f"p{index:06d}"
    created = cfg.start_time + index * 3600
    b = _Builder(post_id, created)

    try:
        arrivals = simulate_arrivals(rng, cfg.base_rate, cfg.decay, cfg.excitation,
                                     cfg.excitation_decay, cfg.horizon, cfg.max_comments)
    except ValueError as exc:
        raise ValueError(f"thread {post_id}: {exc}") from None
    text_ids = []
    for n, t in enumerate(arrivals, start=1):
        aid = f"{post_id}-c{n:05d}"
        ts = created + int(math.floor(t * 60))
        is_reply = bool(text_ids) and rng.random() < cfg.reply_fraction
        parent = text_ids[int(rng.integers(0, len(text_ids)))] if is_reply else None
        text = FILLER[int(rng.integers(0, len(FILLER)))]
        if cfg.whitelist_url_rate and rng.random() < cfg.whitelist_url_rate:
            text += " " + WHITELIST_URLS[int(rng.integers(0, len(WHITELIST_URLS)))]
        b.add(aid, kind=Kind.REPLY if is_reply else Kind.COMMENT, actor_id=_actor(rng),
              timestamp=ts, parent_id=parent, text=text)
        text_ids.append(aid)
        if cfg.reaction_rate > 0:
            r = t + rng.exponential(1.0 / cfg.reaction_rate)
            while r < t + REACTION_WINDOW_MIN:
                b.add_reaction(rng, aid, created + int(math.floor(r * 60)))
                r += rng.exponential(1.0 / cfg.reaction_rate)

    # Plants: choose ranks over the comment+reply order.
    order = [aid for _, aid in b.text_keys()]
    total = len(order)
    used: set[int] = set()
    planted: list[tuple[str, PlantSpec]] = []
    for spec in cfg.plants:
        if spec.count == 0 or rng.random() >= spec.fraction:
            continue
        ranks = [r for r in range(1, total + 1) if r not in used and life_stage(r / total) is spec.stage] if total else []
        if len(ranks) < spec.count:
            if cfg.on_infeasible == "skip":
                continue
            raise InfeasiblePlant(
                f"thread {post_id}: only {len(ranks)} free {spec.stage.value} ranks for "
                f"{spec.count} {spec.label} plant(s) ({total} comments)"
            )
        for r in rng.choice(ranks, size=spec.count, replace=False).tolist():
            used.add(r)
            aid = order[r - 1]
            url = _plant_url(rng, spec.label, hosts)
            b.acts[aid]["text"] = f"{FILLER[int(rng.integers(0, len(FILLER)))]} {url}"
            planted.append((aid, spec))

    directions: dict[str, Optional[IrLabel]] = {aid: None for aid, _ in planted}
    if cfg.ir_regimes is not None and planted:
        _apply_regimes(cfg, rng, b, [aid for aid, _ in planted], directions)

    thread = b.freeze(cfg.page_id)
    truth = [
        PlantTruth(post_id, aid, spec.label, spec.stage, directions[aid])
        for aid, spec in sorted(planted, key=lambda p: thread.get(p[0]).sort_key())
    ]
    return thread, truth


def _apply_regimes(cfg: SynthConfig, rng, b: _Builder, plant_ids: list[str], directions: dict):
    boost, suppress = cfg.ir_regimes
    w = cfg.ir_window_s
    plant_set = set(plant_ids)
    for pid in sorted(plant_ids, key=lambda a: (b.acts[a]["timestamp"], a)):
        t = b.acts[pid]["timestamp"]
        keys = b.sorted_keys()
        elapsed = t - b.created_at
        k_eff = min(cfg.lull_buckets, -(-elapsed // w))
        last = _count(keys, t - w, t)
        hour = _count(keys, t - k_eff * w, t)
        if last * k_eff <= hour:
            directions[pid] = IrLabel.INCREASE
            _boost(cfg, rng, b, pid, t, boost)
        else:
            directions[pid] = IrLabel.DECREASE
            _suppress(rng, b, pid, t, w, suppress, plant_set)


def _boost(cfg: SynthConfig, rng, b: _Builder, pid: str, t: int, factor: float):
    if factor <= 1:
        return
    t0 = (t - b.created_at) / 60.0
    end = t0 + cfg.ir_window_s / 60.0
    history = [a["timestamp"] for a in b.acts.values()
               if a["kind"] is not Kind.REACTION and a["timestamp"] <= t]

    def lam(s):
        exc = sum(math.exp(-(s - (h - b.created_at) / 60.0) / cfg.excitation_decay) for h in history)
        return cfg.base_rate * math.exp(-s / cfg.decay) + cfg.excitation * exc

    bound = (factor - 1) * lam(t0)
    if bound <= 0:
        return
    s = t0
    while True:
        s += rng.exponential(1.0 / bound)
        if s >= end:
            break
        if rng.random() * bound <= (factor - 1) * lam(s):
            ts = min(b.created_at + int(math.floor(s * 60)), t + cfg.ir_window_s - 1)
            b.add_reaction(rng, pid, max(ts, t))


def _suppress(rng, b: _Builder, pid: str, t: int, w: int, keep: float, plant_set: set):
    plant_keys = sorted((b.acts[p]["timestamp"], p) for p in plant_set)
    in_window = sorted(
        (a["timestamp"], a["activity_id"]) for a in b.acts.values()
        if t <= a["timestamp"] < t + w and a["activity_id"] not in plant_set
    )
    for ts, aid in in_window:
        act = b.acts.get(aid)
        if act is None or act["timestamp"] != ts or rng.random() < keep:
            continue
        if act["kind"] is Kind.REACTION:
            del b.acts[aid]
            continue
        old, new = (ts, aid), (ts + w, aid)
        if any(old < pk < new for pk in plant_keys):
            continue  # moving it would change a plant's rank
        act["timestamp"] = ts + w
        for other in b.acts.values():
            if other["kind"] is Kind.REACTION and other["parent_id"] == aid:
                other["timestamp"] += w


def _generate_chunk(args):
    cfg, indices = args
    hosts = _category_hosts(cfg.blacklist_dir)
    return [generate_thread(cfg, i, hosts) for i in indices]


def generate(cfg: SynthConfig, workers: int = 1) -> tuple[list[PostThread], SynthGroundTruth]:
    """Generate ``cfg.n_threads`` threads; output is independent of ``workers``."""
    indices = list(range(cfg.n_threads))
    if workers > 1 and cfg.n_threads > 1:
        chunks = [indices[n::workers] for n in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_generate_chunk, [(cfg, c) for c in chunks]))
        results = sorted((item for part in parts for item in part), key=lambda r: r[0].post_id)
    else:
        results = _generate_chunk((cfg, indices))
    threads, truth = [], SynthGroundTruth()
    for thread, plants in results:
        threads.append(thread)
        truth.plants.extend(plants)
        truth.targets[thread.post_id] = any(
            p.label.cls in (UrlClass.LIGHT, UrlClass.CRITICAL) for p in plants
        )
    return threads, truth


# --- output ------------------------------------------------------------------------

def emit(threads: Sequence[PostThread], path) -> Path:
    """Write threads in the line-delimited ingest format."""
    with atomic_open(path) as fh:
        dump_threads(threads, fh)
    return Path(path)


def write_truth(truth: SynthGroundTruth, path) -> Path:
    """One ``thread`` row per post, then one ``plant`` row per planted comment."""
    def writer(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record", "post_id", "target", "comment_id", "label_class",
                    "label_category", "stage", "direction"])
        for pid in sorted(truth.targets):
            w.writerow(["thread", pid, int(truth.targets[pid]), "", "", "", "", ""])
        for p in truth.plants:
            w.writerow(["plant", p.post_id, "", p.comment_id, p.label.cls.value,
                        p.label.category or "", p.stage.value,
                        p.direction.value if p.direction else ""])
    with atomic_open(path, newline="") as fh:
        writer(fh)
    return Path(path)


def with_seed(cfg: SynthConfig, seed: int) -> SynthConfig:
    return replace(cfg, seed=seed)
