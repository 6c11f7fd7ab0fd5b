"""Classifiers for increase/decrease prediction from preceding-activity vectors.

Both learners are written directly against numpy: a Gaussian naive Bayes
model and discrete two-class AdaBoost over exhaustively searched decision
stumps. Labels are ``IrLabel`` values; internally Increase is +1 and
Decrease is -1, and every tie resolves to Decrease.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .fileio import atomic_write_text
from .influence import IrLabel, IrRecord, Piv

CLASSES = (IrLabel.DECREASE, IrLabel.INCREASE)
VAR_SMOOTHING = 1e-9
MIN_ERROR = 1e-10
# Largest stage weight, reached by a stump with zero weighted error.
MAX_ALPHA = 0.5 * math.log((1 - MIN_ERROR) / MIN_ERROR)


def normalize_piv(piv: Union[Piv, Sequence[float]]) -> np.ndarray:
    """L1-normalise; the zero vector maps to itself."""
    v = np.asarray(piv.components if isinstance(piv, Piv) else piv, dtype=float)
    s = v.sum()
    return v / s if s > 0 else np.zeros_like(v)


def _to_sign(labels) -> np.ndarray:
    return np.array([1 if IrLabel(l) is IrLabel.INCREASE else -1 for l in labels], dtype=np.int8)


def _from_sign(s: int) -> IrLabel:
    return IrLabel.INCREASE if s > 0 else IrLabel.DECREASE


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    labels: tuple[IrLabel, ...]

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.shape[0] != len(self.labels):
            raise ValueError("rows and labels differ in length")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature matrix contains non-finite values")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", tuple(IrLabel(l) for l in self.labels))

    @property
    def y(self) -> np.ndarray:
        return _to_sign(self.labels)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_records(cls, records: Sequence[IrRecord]) -> "FeatureMatrix":
        if not records:
            raise ValueError("no records")
        return cls(np.vstack([normalize_piv(r.piv) for r in records]), tuple(r.sample.label for r in records))


def _require_both_classes(data: FeatureMatrix):
    if len(set(data.labels)) < 2:
        raise ValueError("training data must contain both increase and decrease samples")


def _check_dim(x: np.ndarray, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != k:
        raise ValueError(f"expected {k} features, got {x.shape[-1]}")
    return x


# --- Gaussian naive Bayes ----------------------------------------------------

@dataclass(frozen=True)
class GnbModel:
    priors: np.ndarray      # (2,) ordered as CLASSES
    means: np.ndarray       # (2, k)
    variances: np.ndarray   # (2, k)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(_check_dim(X, self.dim))
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            var = self.variances[c]
            ll = -0.5 * np.sum(np.log(2 * np.pi * var)) - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            out[:, c] = math.log(self.priors[c]) + ll
        return out

    def predict_many(self, X) -> list[IrLabel]:
        jll = self.joint_log_likelihood(X)
        return [IrLabel.INCREASE if inc > dec else IrLabel.DECREASE for dec, inc in jll]


def train_gnb(data: FeatureMatrix) -> GnbModel:
    _require_both_classes(data)
    X, y = data.rows, data.y
    eps = VAR_SMOOTHING * float(np.var(X, axis=0).max())
    if eps == 0.0:
        eps = VAR_SMOOTHING
    priors, means, variances = [], [], []
    for sign in (-1, 1):
        Xc = X[y == sign]
        priors.append(Xc.shape[0] / X.shape[0])
        means.append(Xc.mean(axis=0))
        variances.append(Xc.var(axis=0) + eps)
    return GnbModel(np.array(priors), np.vstack(means), np.vstack(variances))


def predict_gnb(model: GnbModel, x) -> IrLabel:
    return model.predict_many(np.asarray(x, dtype=float)[None, :] if np.ndim(x) == 1 else x)[0]


# --- AdaBoost over decision stumps -----------------------------------------------

@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int  # +1: predict Increase above the threshold
    alpha: float

    def votes(self, X: np.ndarray) -> np.ndarray:
        return np.where(X[:, self.feature] > self.threshold, self.polarity, -self.polarity)


@dataclass(frozen=True)
class StumpEnsemble:
    stumps: tuple[Stump, ...]
    n_estimators: int
    learning_rate: float
    dim: int
    errors: tuple[float, ...] = field(default_factory=tuple)  # weighted error per kept round

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(_check_dim(X, self.dim))
        score = np.zeros(X.shape[0])
        for s in self.stumps:
            score += s.alpha * s.votes(X)
        return score

    def predict_many(self, X) -> list[IrLabel]:
        return [_from_sign(1 if v > 0 else -1) for v in self.decision_function(X)]


class _StumpSearch:
    """Pre-sorted columns so every boosting round is a cumulative-sum scan."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.X = X
        self.pos = (y > 0).astype(float)
        self.neg = 1.0 - self.pos
        self.columns = []
        for f in range(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            vals = X[order, f]
            # Last sorted index of each distinct value.
            ends = np.flatnonzero(np.append(vals[1:] != vals[:-1], True))
            distinct = vals[ends]
            mids = (distinct[:-1] + distinct[1:]) / 2
            mids = np.where(mids >= distinct[1:], distinct[:-1], mids)
            thresholds = np.concatenate(([-np.inf], mids, [np.inf]))
            self.columns.append((order, ends, thresholds))

    def best(self, w: np.ndarray) -> tuple[float, int, float, int]:
        wp, wn = w * self.pos, w * self.neg
        p_total, n_total = wp.sum(), wn.sum()
        best = (np.inf, -1, 0.0, 1)
        for f, (order, ends, thresholds) in enumerate(self.columns):
            p_le = np.concatenate(([0.0], np.cumsum(wp[order])[ends]))
            n_le = np.concatenate(([0.0], np.cumsum(wn[order])[ends]))
            err = np.empty((len(thresholds), 2))
            err[:, 0] = p_le + (n_total - n_le)   # polarity +1
            err[:, 1] = n_le + (p_total - p_le)   # polarity -1
            flat = int(np.argmin(err))
            e = float(err.flat[flat])
            if e < best[0]:
                g, pol = divmod(flat, 2)
                best = (e, f, float(thresholds[g]), 1 if pol == 0 else -1)
        return (max(best[0], 0.0),) + best[1:]


def train_adaboost(
    data: FeatureMatrix, n_estimators: int = 50, learning_rate: float = 1.0, seed: int = 0
) -> StumpEnsemble:
    """Discrete AdaBoost. ``seed`` is accepted for interface symmetry; the
    exhaustive stump search is deterministic and draws no random numbers."""
    _require_both_classes(data)
    if n_estimators < 1:
        raise ValueError("n_estimators must be positive")
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    X, y = data.rows, data.y.astype(float)
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    search = _StumpSearch(X, y)
    stumps, errors = [], []
    for _ in range(n_estimators):
        err, f, thr, pol = search.best(w)
        if err >= 0.5 - 1e-12:
            break
        clamped = max(err, MIN_ERROR)
        alpha = learning_rate * 0.5 * math.log((1 - clamped) / clamped)
        stump = Stump(f, thr, pol, alpha)
        stumps.append(stump)
        errors.append(err)
        if err <= MIN_ERROR:
            break
        w = w * np.exp(-alpha * y * stump.votes(X))
        w /= w.sum()
    return StumpEnsemble(tuple(stumps), n_estimators, learning_rate, X.shape[1], tuple(errors))


def predict_adaboost(model: StumpEnsemble, x) -> IrLabel:
    return model.predict_many(np.asarray(x, dtype=float)[None, :] if np.ndim(x) == 1 else x)[0]


# --- metrics -------------------------------------------------------------------

@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    per_class: dict[IrLabel, ClassScores]
    average: ClassScores  # support-weighted, the "avg/total" row

    def rows(self) -> list[tuple[str, ClassScores]]:
        return [(c.value, self.per_class[c]) for c in CLASSES] + [("avg/total", self.average)]


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def evaluate(pred: Sequence, truth: Sequence) -> Metrics:
    if len(pred) != len(truth):
        raise ValueError("prediction and truth lengths differ")
    if not truth:
        raise ValueError("nothing to evaluate")
    pred = [IrLabel(p) for p in pred]
    truth = [IrLabel(t) for t in truth]
    per = {}
    for c in CLASSES:
        tp = sum(1 for p, t in zip(pred, truth) if p is c and t is c)
        predicted = sum(1 for p in pred if p is c)
        support = sum(1 for t in truth if t is c)
        prec = tp / predicted if predicted else 0.0
        rec = tp / support if support else 0.0
        per[c] = ClassScores(prec, rec, _f1(prec, rec), support)
    n = len(truth)
    avg = ClassScores(
        sum(per[c].precision * per[c].support for c in CLASSES) / n,
        sum(per[c].recall * per[c].support for c in CLASSES) / n,
        sum(per[c].f1 * per[c].support for c in CLASSES) / n,
        n,
    )
    return Metrics(per, avg)


# --- experiment ----------------------------------------------------------------

Model = Union[GnbModel, StumpEnsemble]


def balance_classes(records: Sequence[IrRecord], seed: int = 0) -> list[IrRecord]:
    """Downsample the larger label group to the size of the smaller one, keeping input order."""
    groups = {c: [n for n, r in enumerate(records) if r.sample.label is c] for c in CLASSES}
    size = min(len(g) for g in groups.values())
    rng = np.random.default_rng(seed)
    keep = set()
    for g in groups.values():
        if len(g) > size:
            g = rng.choice(g, size=size, replace=False).tolist()
        keep.update(g)
    return [r for n, r in enumerate(records) if n in keep]


def fit(records: Sequence[IrRecord], classifier: str = "adaboost", n_estimators: int = 50,
        learning_rate: float = 1.0, seed: int = 0, balance: bool = False) -> Model:
    if not records:
        raise ValueError("empty training set")
    if balance:
        records = balance_classes(records, seed)
    data = FeatureMatrix.from_records(records)
    if classifier == "gnb":
        return train_gnb(data)
    if classifier == "adaboost":
        return train_adaboost(data, n_estimators, learning_rate, seed)
    raise ValueError(f"unknown classifier {classifier!r}")


def evaluate_model(model: Model, records: Sequence[IrRecord]) -> Metrics:
    if not records:
        raise ValueError("empty test set")
    data = FeatureMatrix.from_records(records)
    return evaluate(model.predict_many(data.rows), data.labels)


def run_experiment(
    train: Sequence[IrRecord],
    test: Sequence[IrRecord],
    classifier: str = "adaboost",
    params: Optional[dict] = None,
    seed: int = 0,
) -> Metrics:
    """Train on ``train`` (normally benign-URL comments) and score on ``test``."""
    if not train or not test:
        raise ValueError("train and test sets must be non-empty")
    model = fit(train, classifier, seed=seed, **(params or {}))
    return evaluate_model(model, test)


# --- model files -------------------------------------------------------------------

def save_model(model: Model, path) -> None:
    lines = []
    if isinstance(model, GnbModel):
        lines += ["# cascadia model", "model=gnb", f"k={model.dim}", "# class,prior,stat,values..."]
        for c, label in enumerate(CLASSES):
            lines.append(",".join([label.value, repr(float(model.priors[c])), "mean"] + [repr(float(v)) for v in model.means[c]]))
            lines.append(",".join([label.value, repr(float(model.priors[c])), "var"] + [repr(float(v)) for v in model.variances[c]]))
    elif isinstance(model, StumpEnsemble):
        lines += [
            "# cascadia model", "model=adaboost", f"k={model.dim}",
            f"n_estimators={model.n_estimators}", f"learning_rate={model.learning_rate!r}",
            "# feature,threshold,polarity,alpha",
        ]
        for s in model.stumps:
            lines.append(f"{s.feature},{s.threshold!r},{s.polarity},{s.alpha!r}")
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path) -> Model:
    header, body = {}, []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and "," not in line:
            key, _, val = line.partition("=")
            header[key.strip()] = val.strip()
        else:
            body.append(line.split(","))
    kind, k = header.get("model"), int(header.get("k", 0))
    if kind == "gnb":
        priors, means, variances = np.zeros(2), np.zeros((2, k)), np.zeros((2, k))
        for row in body:
            c = CLASSES.index(IrLabel(row[0]))
            priors[c] = float(row[1])
            (means if row[2] == "mean" else variances)[c] = [float(v) for v in row[3:]]
        return GnbModel(priors, means, variances)
    if kind == "adaboost":
        stumps = tuple(Stump(int(f), float(t), int(p), float(a)) for f, t, p, a in body)
        return StumpEnsemble(stumps, int(header["n_estimators"]), float(header["learning_rate"]), k)
    raise ValueError(f"{path}: unrecognised model file")
