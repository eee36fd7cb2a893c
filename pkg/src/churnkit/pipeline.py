"""Pipeline commands: preprocess, train, evaluate, compare, explain.

Every command reads and writes under ``config.out_dir``. Emitted files carry
the config hash and seed; nothing that varies between runs (wall time,
thread count) goes into models, reports or tables, only into logs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import data as dm
from .config import DISPLAY_NAMES, MODEL_NAMES, RunConfig
from .errors import ConfigError, DataError, DimensionError, UnsupportedModelError
from .explain import TreeExplainer, exact_explain, force_plot_data, make_background, mean_abs_shap
from .gbt import GbtModel, feature_importance, fit_gbt, predict_margin
from .linear import LogisticModel, decision_function, fit_logistic, sigmoid
from .metrics import classification_report, confusion, pr_curve, render_number, render_report, roc_curve
from .tree import ForestModel, Tree, fit_forest, fit_tree, predict_forest

log = logging.getLogger("churnkit")


def dump_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def load_json(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    return json.loads(path.read_text())


def write_csv(path, header, rows, meta):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def read_csv(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


class Paths:
    def __init__(self, out_dir):
        self.root = Path(out_dir)

    manifest = property(lambda s: s.root / "manifest.json")
    features = property(lambda s: s.root / "data" / "features.csv")
    split = property(lambda s: s.root / "data" / "split.json")
    missing = property(lambda s: s.root / "reports" / "missing.json")
    duplicates = property(lambda s: s.root / "reports" / "duplicates.json")
    comparison_json = property(lambda s: s.root / "comparison.json")
    comparison_txt = property(lambda s: s.root / "comparison.txt")

    def model(self, name):
        return self.root / "models" / f"{name}.json"

    def train_log(self, name):
        return self.root / "logs" / f"train_{name}.json"

    def report(self, name, part, ext):
        return self.root / "reports" / f"{name}_{part}.{ext}"

    def scores(self, name, part):
        return self.root / "reports" / f"{name}_{part}_scores.csv"

    def curve(self, name, part, kind):
        return self.root / "curves" / f"{name}_{part}_{kind}.csv"

    def explain(self, name, what):
        return self.root / "explain" / f"{name}_{what}"


# ---------------------------------------------------------------- preprocess


def cmd_preprocess(config: RunConfig):
    """Load, check, convert and split the dataset; persist matrix and reports."""
    paths = Paths(config.out_dir)
    raw = dm.load_csv(config.data_path)
    missing = dm.check_missing(raw)
    n_missing = sum(missing.values())
    meta = config.meta()
    dump_json({"meta": meta, "missing": missing, "total": n_missing}, paths.missing)
    if n_missing and not config.allow_missing:
        bad = {k: v for k, v in missing.items() if v}
        raise DataError(f"{config.data_path}: missing cells {bad}; set data.allow_missing to override")
    table = dm.convert_types(raw)
    dups = dm.check_duplicates(table, config.key_column)
    dump_json({"meta": meta, "key_column": config.key_column, "duplicates": dups}, paths.duplicates)
    if dups:
        log.warning("%d duplicated %s values", len(dups), config.key_column)
    X, y = dm.select_features(table, config.drop_list)
    split = dm.train_test_split(X, y, config.split)

    rows = [[repr(float(v)) for v in X.values[i]] + [str(int(y[i]))] for i in range(X.n)]
    write_csv(paths.features, list(X.names) + [dm.LABEL], rows, meta)
    dump_json(
        {
            "meta": meta,
            "split": {"train_fraction": config.split.train_fraction, "seed": config.split.seed,
                      "stratified": config.split.stratified},
            "train_idx": split.train_idx.tolist(),
            "test_idx": split.test_idx.tolist(),
            "train_hash": dm.index_hash(split.train_idx),
            "test_hash": dm.index_hash(split.test_idx),
        },
        paths.split,
    )
    manifest = {
        "meta": meta,
        "dataset": Path(config.data_path).name,
        "n": X.n,
        "d": X.d,
        "features": list(X.names),
        "dropped": list(config.drop_list),
        "positive_rate": float(y.mean()),
        "n_missing": n_missing,
        "n_duplicate_keys": len(dups),
        "n_train": int(split.train_idx.size),
        "n_test": int(split.test_idx.size),
        "class_counts": split.class_counts,
    }
    dump_json(manifest, paths.manifest)
    log.info("preprocessed %d rows, %d features, positive rate %.3f", X.n, X.d, y.mean())
    return manifest


def load_prepared(config: RunConfig):
    """``(split, split_doc, manifest)`` from the preprocess artifacts."""
    paths = Paths(config.out_dir)
    if not paths.manifest.is_file():
        raise DataError(f"{paths.manifest} not found; run preprocess first")
    manifest = load_json(paths.manifest)
    header, rows = read_csv(paths.features)
    values = np.array([[float(c) for c in r[:-1]] for r in rows], dtype=np.float64).reshape(len(rows), len(header) - 1)
    y = dm.as_labels(np.array([int(r[-1]) for r in rows], dtype=np.int64))
    X = dm.FeatureMatrix(tuple(header[:-1]), values)
    sp = load_json(paths.split)
    tr = np.asarray(sp["train_idx"], dtype=np.int64)
    te = np.asarray(sp["test_idx"], dtype=np.int64)
    if np.intersect1d(tr, te).size:
        raise DataError("train and test partitions overlap")
    if dm.index_hash(tr) != sp["train_hash"] or dm.index_hash(te) != sp["test_hash"]:
        raise DataError("split file hashes do not match its indices")
    split = dm.Split(tr, te, X.take(tr), dm.as_labels(y[tr]), X.take(te), dm.as_labels(y[te]),
                     manifest.get("class_counts", {}))
    return split, sp, manifest


# ---------------------------------------------------------------- models


def _model_kind(model):
    for cls, kind in ((LogisticModel, "logistic"), (GbtModel, "gbt"), (ForestModel, "forest")):
        if isinstance(model, cls):
            return kind
    if isinstance(model, Tree):
        return "tree"
    raise UnsupportedModelError(type(model).__name__)


def model_to_dict(model, names=()):
    if isinstance(model, Tree):
        return {"kind": "tree", "names": list(names), "d": len(names), "nodes": model.to_list()}
    return model.to_dict()


def model_from_dict(doc):
    kind = doc.get("kind")
    if kind == "logistic":
        return LogisticModel.from_dict(doc)
    if kind == "gbt":
        return GbtModel.from_dict(doc)
    if kind == "forest":
        return ForestModel.from_dict(doc)
    if kind == "tree":
        return Tree.from_list(doc["nodes"])
    raise DataError(f"unknown model kind {kind!r}")


def load_model(path):
    doc = load_json(path)
    if "model" not in doc or "meta" not in doc:
        raise DataError(f"{path}: not a churnkit model file")
    return model_from_dict(doc["model"]), doc["meta"], doc["model"]


def model_scores(model, X):
    """(margin-or-raw score, probability) of every row."""
    if isinstance(model, LogisticModel):
        s = decision_function(model, X)
        return s, sigmoid(s)
    if isinstance(model, GbtModel):
        s = predict_margin(model, X)
        return s, sigmoid(s)
    if isinstance(model, ForestModel):
        p = predict_forest(model, X)
        return p, p
    p = model.predict(np.ascontiguousarray(X.values if hasattr(X, "values") else X))
    return p, p


def model_d(doc):
    if doc["kind"] == "logistic":
        return len(doc["weights"])
    return int(doc["d"])


def fit_named(name, config: RunConfig, X, y):
    if name == "logistic":
        return fit_logistic(X, y, config.logistic)
    if name == "tree":
        return fit_tree(X, y, config.tree)
    if name == "forest":
        return fit_forest(X, y, config.forest, threads=config.threads)
    if name == "gbt":
        return fit_gbt(X, y, config.gbt)
    raise ConfigError(f"unknown model {name!r}; choose one of {', '.join(MODEL_NAMES)}")


def cmd_train(config: RunConfig, model_name):
    if model_name not in MODEL_NAMES:
        raise ConfigError(f"unknown model {model_name!r}; choose one of {', '.join(MODEL_NAMES)}")
    paths = Paths(config.out_dir)
    split, sp, _ = load_prepared(config)
    t0 = time.perf_counter()
    model = fit_named(model_name, config, split.X_train, split.y_train)
    wall = time.perf_counter() - t0
    meta = dict(config.meta(), model=model_name, train_hash=sp["train_hash"], n_train=int(split.train_idx.size))
    dump_json({"meta": meta, "model": model_to_dict(model, split.X_train.names)}, paths.model(model_name))
    dump_json(
        {"meta": meta, "wall_time_s": wall, "threads": config.threads, "config": config.hashed()},
        paths.train_log(model_name),
    )
    log.info("trained %s in %.2fs", model_name, wall)
    return model


# ---------------------------------------------------------------- evaluate


def _evaluate(model, name, X, y, part, config, paths):
    meta = dict(config.meta(), model=name, partition=part)
    scores, proba = model_scores(model, X)
    pred = (proba >= 0.5).astype(np.int64)
    cm = confusion(y, pred)
    report = classification_report(y, pred)
    doc = {"meta": meta, "confusion": {"tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "tp": cm.tp}}
    doc.update(report.to_dict())
    if 0 < y.sum() < y.size:
        roc = roc_curve(y, proba)
        pr = pr_curve(y, proba)
        doc["roc_auc"] = roc.auc
        doc["average_precision"] = pr.auc
        for kind, c in (("roc", roc), ("pr", pr)):
            xs, ys = ("fpr", "tpr") if kind == "roc" else ("recall", "precision")
            rows = [[repr(float(a)), repr(float(b)), repr(float(t))] for a, b, t in zip(c.x, c.y, c.thresholds)]
            write_csv(paths.curve(name, part, kind), [xs, ys, "threshold"], rows,
                      dict(meta, auc=repr(c.auc)))
    if isinstance(model, GbtModel):
        names = model.names or tuple(f"x{j}" for j in range(model.d))
        doc["feature_importance"] = {
            kind: {names[j]: v for j, v in feature_importance(model, kind).items()}
            for kind in ("gain", "weight", "cover")
        }
    dump_json(doc, paths.report(name, part, "json"))
    text = render_report(report)
    text += "# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())) + "\n"
    paths.report(name, part, "txt").write_text(text)
    write_csv(paths.scores(name, part), ["row", "score", "probability", "label"],
              [[i, repr(float(s)), repr(float(p)), int(t)] for i, (s, p, t) in enumerate(zip(scores, proba, y))],
              meta)
    return doc, report


def cmd_evaluate(config: RunConfig, model_path, on_train=False):
    """Score the held-out partition (or, explicitly, the training one)."""
    paths = Paths(config.out_dir)
    model, mmeta, doc = load_model(model_path)
    split, sp, _ = load_prepared(config)
    if mmeta.get("train_hash") != sp["train_hash"]:
        raise DataError("model was trained on a different split (train hash mismatch)")
    d = model_d(doc)
    if d != split.X_test.d:
        raise DimensionError(d, split.X_test.d)
    name = mmeta.get("model", _model_kind(model))
    if on_train:
        return _evaluate(model, name, split.X_train, split.y_train, "train", config, paths)[0]
    return _evaluate(model, name, split.X_test, split.y_test, "test", config, paths)[0]


# ---------------------------------------------------------------- compare


def render_comparison(rows, meta):
    lines = [f"{'S.No.':<7}{'Classifier Name':<24}{'Accuracy Score':>16}{'F1 Score':>10}"]
    for i, r in enumerate(rows, start=1):
        lines.append(
            f"{i:<7}{r['classifier']:<24}{render_number(r['accuracy'], 3):>16}{render_number(r['f1'], 3):>10}"
        )
    lines.append("# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())))
    return "\n".join(lines) + "\n"


def cmd_compare(config: RunConfig):
    """Train all four classifiers on one split and tabulate test accuracy / churn F1."""
    paths = Paths(config.out_dir)
    if not paths.manifest.is_file():
        cmd_preprocess(config)
    split, sp, _ = load_prepared(config)
    meta = config.meta()
    rows = []
    try:
        for name in MODEL_NAMES:
            model = cmd_train(config, name)
            test_doc, test_rep = _evaluate(model, name, split.X_test, split.y_test, "test", config, paths)
            _, train_rep = _evaluate(model, name, split.X_train, split.y_train, "train", config, paths)
            rows.append({
                "model": name,
                "classifier": DISPLAY_NAMES[name],
                "accuracy": test_rep.accuracy,
                "f1": test_rep.classes[1].f1,
                "roc_auc": test_doc.get("roc_auc"),
                "train_accuracy": train_rep.accuracy,
                "train_f1": train_rep.classes[1].f1,
                "report": str(paths.report(name, "test", "json").relative_to(paths.root)),
            })
    except Exception:
        dump_json({"meta": meta, "partial": True, "rows": rows}, paths.root / "comparison_partial.json")
        raise
    ranking = [r["classifier"] for r in sorted(rows, key=lambda r: (-r["f1"], MODEL_NAMES.index(r["model"])))]
    doc = {"meta": meta, "partition": "test", "rows": rows, "ranking_by_f1": ranking}
    dump_json(doc, paths.comparison_json)
    paths.comparison_txt.write_text(render_comparison(rows, meta))
    log.info("F1 ranking: %s", " > ".join(ranking))
    return doc


# ---------------------------------------------------------------- explain


def parse_rows(spec, n):
    if spec is None:
        return None
    parts = [p.strip() for p in str(spec).split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty row selection")
    rows = []
    for p in parts:
        try:
            i = int(p)
        except ValueError:
            raise ConfigError(f"bad row index {p!r}") from None
        if not 0 <= i < n:
            raise ConfigError(f"row {i} out of range for {n} rows")
        rows.append(i)
    return rows


def cmd_explain(config: RunConfig, model_path, rows=None, summary=False, exact=False, on_train=False):
    """Shapley attributions of test rows (all of them with ``summary``)."""
    paths = Paths(config.out_dir)
    model, mmeta, doc = load_model(model_path)
    split, _, _ = load_prepared(config)
    X = split.X_train if on_train else split.X_test
    part = "train" if on_train else "test"
    if model_d(doc) != X.d:
        raise DimensionError(model_d(doc), X.d)
    selected = parse_rows(rows, X.n)
    if selected is None:
        if not summary:
            raise ConfigError("select rows with --rows or request --summary")
        selected = list(range(X.n))
    name = mmeta.get("model", _model_kind(model))
    background = make_background(split.X_train, config.background_size, config.background_seed)
    Xs = X.values[selected]
    if exact:
        result = exact_explain(model, background, Xs, X.names)
    else:
        if isinstance(model, LogisticModel):
            raise UnsupportedModelError(
                "logistic regression has no tree structure; rerun with --exact "
                "(brute-force enumeration, at most 20 features)"
            )
        result = TreeExplainer(model, background).explain(Xs, X.names, threads=config.threads)
    meta = dict(config.meta(), model=name, partition=part, background_size=int(background.shape[0]),
                background_seed=config.background_seed, unit="margin (log-odds)" if name in ("gbt", "logistic") else "probability")
    margins = result.margins
    long_rows = []
    for k, i in enumerate(selected):
        for j, f in enumerate(result.names):
            long_rows.append([i, f, repr(float(result.values[k, j])), repr(result.base_value), repr(float(margins[k]))])
    write_csv(paths.explain(name, "shap.csv"), ["row", "feature", "phi", "base", "margin"], long_rows, meta)
    ranking = mean_abs_shap(result)
    write_csv(paths.explain(name, "summary.csv"), ["feature", "mean_abs_shap"],
              [[f, repr(v)] for f, v in ranking], meta)
    force = []
    for k, i in enumerate(selected):
        fp = force_plot_data(result, k)
        fp["row"] = i
        force.append(fp)
    if not summary or len(selected) <= 50:
        for fp in force:
            dump_json(dict(fp, meta=meta), paths.explain(name, f"force_{fp['row']}.json"))
    dump_json({"meta": meta, "rows": selected, "base_value": result.base_value,
               "summary": [[f, v] for f, v in ranking]}, paths.explain(name, "meta.json"))
    return result, selected, force


def make_synthetic(path, n=3333, seed=0):
    table = dm.make_synthetic_telco(n, seed)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    dm.write_csv(table, path)
    return table


__all__ = [
    "cmd_preprocess", "cmd_train", "cmd_evaluate", "cmd_compare", "cmd_explain",
    "load_model", "load_prepared", "make_synthetic",
]
