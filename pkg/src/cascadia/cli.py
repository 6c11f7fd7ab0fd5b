"""``cascadia`` command line.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import shutil
import sys
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .cascade import (
    build_distribution_matrix, build_prediction_matrix, cross_validate, predict_final,
    read_prediction_matrix, write_prediction_matrix,
)
from .fileio import atomic_open
from .influence import (
    Stage, extract_ir_dataset, fmt_float, label_key, read_ir_dataset, stage_cdfs,
    write_ir_dataset,
)
from .ingest import Kind, load_threads, n_comment
from .learn import evaluate_model, fit, load_model, save_model
from .stats import compare_cascades
from .synth import emit, generate, load_config, with_seed, write_truth
from .urlclass import (
    BlacklistIndex, UrlClass, default_blacklist_dir, default_whitelist_file, label_thread,
    load_whitelist, split_targets,
)

PIPELINE_REPORTS = (
    "labels.csv",
    "cascade_cv.csv",
    "cascade_stats.csv",
    "ir_dataset.csv",
    "ir_metrics.csv",
    "stage_cdf.csv",
    "stage_summary.csv",
)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- helpers -------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return fmt_float(x)
    return "" if x is None else str(x)


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@contextmanager
def _output(path: Optional[Path]):
    """Text sink: stdout when ``path`` is None, otherwise an atomically replaced file."""
    if path is None:
        yield sys.stdout
    else:
        with atomic_open(path, newline="") as fh:
            yield fh


def _write_csv(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def _resolve(args, path) -> Optional[Path]:
    if path is None:
        return None
    path = Path(path)
    if args.out_dir and not path.is_absolute():
        return Path(args.out_dir) / path
    return path


def _lists(args):
    bl = args.blacklist_dir or default_blacklist_dir()
    wl = args.whitelist_file or default_whitelist_file()
    return load_whitelist(wl), BlacklistIndex.load(bl)


def _final(v: Optional[int]) -> Optional[int]:
    return None if v is None or v <= 0 else v


def _seed(args, default=0) -> int:
    return default if args.seed is None else args.seed


def _workers(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CASCADIA_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"CASCADIA_THREADS must be an integer, got {env!r}") from None


def _manifest(args, argv, params: dict, inputs: list, started: float) -> dict:
    return {
        "command_line": ["cascadia"] + list(argv),
        "config_digest": hashlib.sha256(json.dumps(params, sort_keys=True, default=str).encode()).hexdigest(),
        "params": params,
        "seeds": {"seed": _seed(args)},
        "inputs": {str(p): _digest(p) for p in inputs if p is not None and Path(p).is_file()},
        "versions": {"cascadia": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def _maybe_manifest(args, params, inputs):
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        m = _manifest(args, args._argv, params, inputs, args._started)
        (out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")


# --- report builders (shared by the subcommands and the pipeline) ---------------

def labels_rows(threads, whitelist, index, final_minutes):
    for t in threads:
        lab = label_thread(t, whitelist, index)
        yield [t.post_id, lab.value.value, lab.worst.value if lab.worst else "none",
               n_comment(t, final_minutes)]


LABELS_HEADER = ["post_id", "label", "worst", "final_comments"]
CV_HEADER = ["direction", "train_threads", "test_threads", "precision_hits", "predictable",
             "total", "precision", "predictable_rate"]


def cv_rows(targets, nontargets, directions, p):
    pairs = {"target_to_nontarget": (targets, nontargets), "nontarget_to_target": (nontargets, targets)}
    for name in directions:
        train, test = pairs[name]
        cv = cross_validate(train, test, p["window_min"], p["horizon_min"], p["final_min"],
                            p["resamples"], p["percentile"], p["seed"], p["workers"])
        yield [name, len(train), len(test), cv.precision_hits, cv.predictable, cv.total,
               cv.precision, cv.predictable_rate]


STATS_HEADER = ["row", "n", "mean", "sd", "min", "max", "d_statistic", "p_value"]


def stats_rows(targets, nontargets, final_minutes):
    st, sn, ks = compare_cascades(targets, nontargets, final_minutes)
    return [
        ["target", st.n, st.mean, st.dispersion, st.min, st.max, None, None],
        ["nontarget", sn.n, sn.mean, sn.dispersion, sn.min, sn.max, None, None],
        ["ks", ks.n1 + ks.n2, None, None, None, None, ks.d_statistic, ks.p_value],
    ]


def stats_text(rows) -> str:
    out = io.StringIO()
    out.write(f"{'':<10}{'N':>10}{'Mean':>12}{'SD':>12}{'Min':>10}{'Max':>10}\n")
    for r in rows[:2]:
        out.write(f"{r[0]:<10}{r[1]:>10}{_fmt(r[2]):>12}{_fmt(r[3]):>12}{_fmt(r[4]):>10}{_fmt(r[5]):>10}\n")
    ks = rows[2]
    out.write(f"KS-test for target and non-targets: D={_fmt(ks[6])}, p={_fmt(ks[7])}\n")
    return out.getvalue()


METRICS_HEADER = ["classifier", "test_class", "row", "precision", "recall", "f1", "support"]


def metrics_rows(metrics, classifier="", test_class=""):
    for name, s in metrics.rows():
        yield [classifier, test_class, name, s.precision, s.recall, s.f1, s.support]


def metrics_text(metrics, title="") -> str:
    out = io.StringIO()
    if title:
        out.write(title + "\n")
    out.write(f"{'':<12}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}\n")
    for name, s in metrics.rows():
        out.write(f"{name:<12}{s.precision:>10.2f}{s.recall:>10.2f}{s.f1:>10.2f}{s.support:>10}\n")
    return out.getvalue()


CDF_HEADER = ["group", "position_ratio", "cdf"]


def cdf_rows(records, by="category"):
    for group, points in stage_cdfs(records, by).items():
        for x, c in points:
            yield [group, x, c]


SUMMARY_HEADER = ["group", "stage", "n", "share", "increase_share", "mean_finite_ir",
                  "median_elapsed_prev_s"]


def stage_summary_rows(records):
    groups = {}
    for r in records:
        groups.setdefault(label_key(r.url_label), []).append(r)
    for group in sorted(groups):
        recs = groups[group]
        for stage in Stage:
            sel = [r for r in recs if r.sample.stage is stage]
            finite = [r.sample.ir for r in sel if r.sample.ir != float("-inf")]
            elapsed = [r.sample.elapsed_since_prev_seconds for r in sel
                       if r.sample.elapsed_since_prev_seconds is not None]
            yield [
                group, stage.value, len(sel), len(sel) / len(recs),
                (sum(r.sample.label.value == "increase" for r in sel) / len(sel)) if sel else None,
                float(np.mean(finite)) if finite else None,
                float(np.median(elapsed)) if elapsed else None,
            ]


# --- subcommands ------------------------------------------------------------------

def cmd_ingest_validate(args):
    threads = load_threads(args.input)
    kinds = {k: 0 for k in Kind}
    for t in threads:
        for a in t.activities:
            kinds[a.kind] += 1
    print(f"threads={len(threads)} activities={sum(kinds.values())} "
          + f"comments={kinds[Kind.COMMENT]} replies={kinds[Kind.REPLY]} reactions={kinds[Kind.REACTION]}")
    _maybe_manifest(args, {"command": "ingest validate"}, [args.input])


def cmd_label(args):
    threads = load_threads(args.input)
    wl, idx = _lists(args)
    with _output(_resolve(args, args.output)) as fh:
        _write_csv(fh, LABELS_HEADER, labels_rows(threads, wl, idx, _final(args.final_min)))
    _maybe_manifest(args, {"command": "label"}, [args.input])


def _select(args, threads):
    if args.subset == "all":
        return threads
    wl, idx = _lists(args)
    targets, nontargets = split_targets(threads, wl, idx)
    return targets if args.subset == "target" else nontargets


def cmd_cascade_build(args):
    threads = _select(args, load_threads(args.input))
    d = build_distribution_matrix(threads, args.window_min, args.horizon_min, _final(args.final_min))
    m = build_prediction_matrix(d, args.resamples, args.percentile, _seed(args), _workers(args))
    out = _resolve(args, args.output)
    write_prediction_matrix(m, out)
    print(f"{len(m.cells)} cells from {len(threads)} threads -> {out}")
    _maybe_manifest(args, {"command": "cascade build", **m.provenance()}, [args.input])


def cmd_cascade_predict(args):
    m = read_prediction_matrix(args.matrix)
    if args.input:
        threads = load_threads(args.input)
        with _output(_resolve(args, args.output)) as fh:
            rows = []
            for t in threads:
                count = n_comment(t, args.observed_min)
                rows.append([t.post_id, args.observed_min, count, predict_final(m, args.observed_min, count)])
            _write_csv(fh, ["post_id", "observed_min", "observed_comments", "bound"], rows)
    else:
        if args.count is None:
            raise UsageError("cascade predict needs --count or --input")
        bound = predict_final(m, args.observed_min, args.count)
        print("unpredictable" if bound is None else f">= {bound}")


def cmd_cascade_cv(args):
    threads = load_threads(args.input)
    wl, idx = _lists(args)
    targets, nontargets = split_targets(threads, wl, idx)
    directions = {"both": ("target_to_nontarget", "nontarget_to_target"),
                  "t2n": ("target_to_nontarget",), "n2t": ("nontarget_to_target",)}[args.direction]
    p = dict(window_min=args.window_min, horizon_min=args.horizon_min, final_min=_final(args.final_min),
             resamples=args.resamples, percentile=args.percentile, seed=_seed(args), workers=_workers(args))
    with _output(_resolve(args, args.output)) as fh:
        _write_csv(fh, CV_HEADER, cv_rows(targets, nontargets, directions, p))
    _maybe_manifest(args, {"command": "cascade cv", **p}, [args.input])


def cmd_stats_compare(args):
    targets, nontargets = load_threads(args.targets), load_threads(args.nontargets)
    rows = stats_rows(targets, nontargets, _final(args.final_min))
    with _output(_resolve(args, args.output)) as fh:
        if args.format == "csv":
            _write_csv(fh, STATS_HEADER, rows)
        else:
            fh.write(stats_text(rows))
    _maybe_manifest(args, {"command": "stats compare", "final_min": args.final_min},
                    [args.targets, args.nontargets])


def cmd_ir_extract(args):
    threads = load_threads(args.input)
    wl, idx = _lists(args)
    records = extract_ir_dataset(threads, wl, idx, args.delta_t_s, args.k)
    with _output(_resolve(args, args.output)) as fh:
        write_ir_dataset(records, fh, args.k)
    _maybe_manifest(args, {"command": "ir extract", "delta_t_s": args.delta_t_s, "k": args.k}, [args.input])


def cmd_ir_stages(args):
    records = read_ir_dataset(args.dataset)
    with _output(_resolve(args, args.output)) as fh:
        if args.summary:
            _write_csv(fh, SUMMARY_HEADER, stage_summary_rows(records))
        else:
            _write_csv(fh, CDF_HEADER, cdf_rows(records, args.by))


def _filter_class(records, cls):
    if not cls:
        return records
    return [r for r in records if r.url_label.cls.value == cls]


def cmd_learn_train(args):
    records = _filter_class(read_ir_dataset(args.train), args.label_class)
    model = fit(records, args.model, args.n_estimators, args.learning_rate, _seed(args), args.balance)
    out = _resolve(args, args.model_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"trained {args.model} on {len(records)} records -> {out}")


def cmd_learn_eval(args):
    model = load_model(args.model_file)
    records = _filter_class(read_ir_dataset(args.test), args.label_class)
    metrics = evaluate_model(model, records)
    with _output(_resolve(args, args.output)) as fh:
        if args.format == "csv":
            _write_csv(fh, METRICS_HEADER, metrics_rows(metrics, "", args.label_class or ""))
        else:
            fh.write(metrics_text(metrics))


def cmd_synth(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    threads, truth = generate(cfg, _workers(args))
    out = _resolve(args, args.out)
    emit(threads, out)
    if args.truth:
        write_truth(truth, _resolve(args, args.truth))
    print(f"{len(threads)} threads, {len(truth.plants)} planted comments -> {out}")
    _maybe_manifest(args, {"command": "synth", "config_digest": cfg.digest(), "seed": cfg.seed}, [args.config])


def run_pipeline(threads, whitelist, index, out_dir: Path, p: dict) -> list[Path]:
    """Write every pipeline report into ``out_dir``; returns the written paths."""
    if not threads:
        raise DataError("no threads")

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:
            raise DataError(f"stage {name!r} failed: {exc}") from exc

    def write(name, header, rows):
        with atomic_open(out_dir / name, newline="") as fh:
            _write_csv(fh, header, rows)

    final = p["final_min"]
    stage("label", lambda: write("labels.csv", LABELS_HEADER, list(labels_rows(threads, whitelist, index, final))))
    targets, nontargets = split_targets(threads, whitelist, index)
    stage("cascade cv", lambda: write("cascade_cv.csv", CV_HEADER, list(cv_rows(
        targets, nontargets, ("target_to_nontarget", "nontarget_to_target"), p))))
    stage("stats compare", lambda: write("cascade_stats.csv", STATS_HEADER, stats_rows(targets, nontargets, final)))
    records = stage("ir extract", lambda: extract_ir_dataset(threads, whitelist, index, p["delta_t_s"], p["k"]))
    with atomic_open(out_dir / "ir_dataset.csv", newline="") as fh:
        write_ir_dataset(records, fh, p["k"])

    def learn_stage():
        train = [r for r in records if r.url_label.cls is UrlClass.BENIGN]
        rows = []
        for clf in ("gnb", "adaboost"):
            model = fit(train, clf, p["n_estimators"], p["learning_rate"], p["seed"], p["balance"])
            for cls in (UrlClass.LIGHT, UrlClass.CRITICAL):
                test = [r for r in records if r.url_label.cls is cls]
                if test:
                    rows.extend(metrics_rows(evaluate_model(model, test), clf, cls.value))
        write("ir_metrics.csv", METRICS_HEADER, rows)

    stage("learn", learn_stage)
    stage("ir stages", lambda: write("stage_cdf.csv", CDF_HEADER, list(cdf_rows(records))))
    stage("ir stages", lambda: write("stage_summary.csv", SUMMARY_HEADER, list(stage_summary_rows(records))))
    return [out_dir / name for name in PIPELINE_REPORTS]


def cmd_pipeline(args):
    if not args.out_dir:
        raise UsageError("pipeline needs --out-dir")
    out = Path(args.out_dir)
    threads = load_threads(args.input)
    wl, idx = _lists(args)
    p = dict(window_min=args.window_min, horizon_min=args.horizon_min, final_min=_final(args.final_min),
             resamples=args.resamples, percentile=args.percentile, seed=_seed(args), workers=_workers(args),
             delta_t_s=args.delta_t_s, k=args.k, n_estimators=args.n_estimators,
             learning_rate=args.learning_rate, balance=args.balance)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=out.parent, prefix=f".{out.name}.partial."))
    try:
        run_pipeline(threads, wl, idx, staging, p)
        inputs = [args.input]
        for d in (args.blacklist_dir, args.whitelist_file):
            if d is not None and Path(d).is_file():
                inputs.append(d)
        manifest = _manifest(args, args._argv, {k: v for k, v in p.items() if k != "workers"},
                             inputs, args._started)
        manifest["reports"] = {name: _digest(staging / name) for name in PIPELINE_REPORTS}
        (staging / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        out.mkdir(parents=True, exist_ok=True)
        for name in PIPELINE_REPORTS + ("manifest.json",):
            os.replace(staging / name, out / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    print(f"{len(PIPELINE_REPORTS)} reports + manifest -> {out}")


# --- argument parsing -------------------------------------------------------------

def _add_cascade_params(p, cv=False):
    p.add_argument("--window-min", type=int, default=5, help="DAV window length in minutes (default 5)")
    p.add_argument("--horizon-min", type=int, default=120,
                   help="observation horizon in minutes, a multiple of the window (default 120)")
    p.add_argument("--final-min", type=int, default=None,
                   help="minutes after creation at which the final size is read; omit or 0 for every comment")
    p.add_argument("--resamples", type=int, default=1000, help="bootstrap resamples per cell (default 1000)")
    p.add_argument("--percentile", type=float, default=50,
                   help="percentile of resample minima used as the bound (default 50)")


def _add_lists(p):
    p.add_argument("--blacklist-dir", type=Path, default=None,
                   help="Shalla-style directory of <category>/domains files (default: bundled fixture)")
    p.add_argument("--whitelist-file", type=Path, default=None,
                   help="whitelist, one host suffix per line (default: bundled list)")


def _add_ir_params(p):
    p.add_argument("--delta-t-s", type=int, default=60, help="window / bucket length in seconds (default 60)")
    p.add_argument("--k", type=int, default=60, help="number of preceding buckets in each vector (default 60)")


def _add_learn_params(p):
    p.add_argument("--n-estimators", type=int, default=50, help="AdaBoost rounds (default 50)")
    p.add_argument("--learning-rate", type=float, default=1.0, help="AdaBoost stage-weight multiplier (default 1)")
    p.add_argument("--balance", action="store_true",
                   help="downsample the majority label in the training set")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $CASCADIA_THREADS or 1)")
    common.add_argument("--out-dir", type=Path, default=None,
                        help="directory for outputs and the run manifest")

    parser = _Parser(prog="cascadia", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cascadia {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    ingest = sub.add_parser("ingest", help="input file checks").add_subparsers(dest="action", metavar="ACTION",
                                                                                 parser_class=_Parser)
    ingest.required = True
    p = ingest.add_parser("validate", parents=[common], help="parse a corpus and print counts")
    p.add_argument("--input", type=Path, required=True, help="JSONL activity stream")
    p.set_defaults(func=cmd_ingest_validate)

    p = sub.add_parser("label", parents=[common], help="label threads target / non-target")
    p.add_argument("--input", type=Path, required=True, help="JSONL activity stream")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    p.add_argument("--final-min", type=int, default=None,
                   help="read final sizes this many minutes after creation (default: every comment)")
    _add_lists(p)
    p.set_defaults(func=cmd_label)

    cascade = sub.add_parser("cascade", help="bandwagon cascade-size prediction").add_subparsers(
        dest="action", metavar="ACTION", parser_class=_Parser)
    cascade.required = True
    p = cascade.add_parser("build", parents=[common], help="build a prediction matrix")
    p.add_argument("--input", type=Path, required=True, help="JSONL activity stream")
    p.add_argument("--output", type=Path, required=True, help="matrix CSV (a .meta.json sidecar is written too)")
    p.add_argument("--subset", choices=("all", "target", "nontarget"), default="all",
                   help="threads used to build the matrix (default all)")
    _add_cascade_params(p)
    _add_lists(p)
    p.set_defaults(func=cmd_cascade_build)

    p = cascade.add_parser("predict", parents=[common], help="query a prediction matrix")
    p.add_argument("--matrix", type=Path, required=True, help="matrix CSV written by cascade build")
    p.add_argument("--observed-min", type=int, default=120, help="minutes observed so far (default 120)")
    p.add_argument("--count", type=int, help="comments observed so far")
    p.add_argument("--input", type=Path, help="predict every thread of a corpus instead")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    p.set_defaults(func=cmd_cascade_predict)

    p = cascade.add_parser("cv", parents=[common], help="target/non-target cross validation")
    p.add_argument("--input", type=Path, required=True, help="JSONL activity stream")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    p.add_argument("--direction", choices=("both", "t2n", "n2t"), default="both",
                   help="train on targets/test on non-targets, the reverse, or both (default)")
    _add_cascade_params(p)
    _add_lists(p)
    p.set_defaults(func=cmd_cascade_cv)

    stats = sub.add_parser("stats", help="cascade-size statistics").add_subparsers(
        dest="action", metavar="ACTION", parser_class=_Parser)
    stats.required = True
    p = stats.add_parser("compare", parents=[common], help="summaries and two-sample KS test")
    p.add_argument("--targets", type=Path, required=True, help="JSONL corpus of target threads")
    p.add_argument("--nontargets", type=Path, required=True, help="JSONL corpus of non-target threads")
    p.add_argument("--final-min", type=int, default=None,
                   help="read final sizes this many minutes after creation (default: every comment)")
    p.add_argument("--format", choices=("text", "csv"), default="text", help="aligned text (default) or CSV")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    p.set_defaults(func=cmd_stats_compare)

    ir = sub.add_parser("ir", help="influence-ratio datasets").add_subparsers(
        dest="action", metavar="ACTION", parser_class=_Parser)
    ir.required = True
    p = ir.add_parser("extract", parents=[common], help="one row per URL-carrying comment")
    p.add_argument("--input", type=Path, required=True, help="JSONL activity stream")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    _add_ir_params(p)
    _add_lists(p)
    p.set_defaults(func=cmd_ir_extract)

    p = ir.add_parser("stages", parents=[common], help="position-ratio CDFs per label category")
    p.add_argument("--dataset", type=Path, required=True, help="IR dataset CSV from ir extract")
    p.add_argument("--by", choices=("category", "class"), default="category",
                   help="group CDFs by label category (default) or class")
    p.add_argument("--summary", action="store_true", help="per-stage counts instead of CDF points")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    p.set_defaults(func=cmd_ir_stages)

    learn = sub.add_parser("learn", help="increase/decrease classifiers").add_subparsers(
        dest="action", metavar="ACTION", parser_class=_Parser)
    learn.required = True
    p = learn.add_parser("train", parents=[common], help="train a classifier on an IR dataset")
    p.add_argument("--model", choices=("gnb", "adaboost"), required=True, help="classifier to train")
    p.add_argument("--train", type=Path, required=True, help="IR dataset CSV used for training")
    p.add_argument("--model-file", type=Path, default=Path("model.txt"),
                   help="where to write the model (default model.txt, under --out-dir if given)")
    p.add_argument("--label-class", choices=[c.value for c in UrlClass], default=None,
                   help="only use rows of this URL class")
    _add_learn_params(p)
    p.set_defaults(func=cmd_learn_train)

    p = learn.add_parser("eval", parents=[common], help="score a model on an IR dataset")
    p.add_argument("--model-file", type=Path, required=True, help="model written by learn train")
    p.add_argument("--test", type=Path, required=True, help="IR dataset CSV to score")
    p.add_argument("--label-class", choices=[c.value for c in UrlClass], default=None,
                   help="only score rows of this URL class")
    p.add_argument("--format", choices=("text", "csv"), default="text", help="aligned text (default) or CSV")
    p.add_argument("--output", type=Path, help="output file (default stdout)")
    p.set_defaults(func=cmd_learn_eval)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--config", type=Path, required=True, help="key = value generator config")
    p.add_argument("--out", type=Path, required=True, help="JSONL corpus to write")
    p.add_argument("--truth", type=Path, help="ground-truth CSV to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage and write the report set")
    p.add_argument("--input", type=Path, required=True, help="JSONL activity stream")
    _add_lists(p)
    _add_cascade_params(p)
    _add_ir_params(p)
    _add_learn_params(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv, args._started = argv, time.time()
    try:
        args.func(args)
    except UsageError as exc:
        print(f"cascadia: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"cascadia: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
