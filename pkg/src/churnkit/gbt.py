"""Regularized second-order gradient boosting for binary churn labels.

Each round fits a depth-limited regression tree to the gradient/hessian of
the class-weighted logistic loss, scores splits with the closed-form
structure gain and sets leaves to the clipped Newton weight.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import _kernels
from .data import as_labels
from .errors import DataError, NumericError
from .linear import sigmoid
from .tree import Tree, TreeBuilder, check_matrix


@dataclass(frozen=True)
class GbtParams:
    """Boosting hyperparameters. Defaults are the tuned values used for the
    churn experiment; ``silent`` and ``n_jobs`` never affect the numbers."""

    objective: str = "binary:logistic"
    colsample_bylevel: float = 0.7
    colsample_bytree: float = 0.8
    learning_rate: float = 0.15
    gamma: float = 1.0
    max_depth: int = 4
    max_delta_step: float = 3.0
    min_child_weight: float = 1.0
    n_estimators: int = 50
    reg_lambda: float = 10.0
    scale_pos_weight: float = 1.5
    subsample: float = 0.9
    seed: int = 0
    silent: bool = False
    n_jobs: int = 4

    def __post_init__(self):
        if self.objective != "binary:logistic":
            raise DataError(f"unsupported objective {self.objective!r}")
        for name in ("colsample_bylevel", "colsample_bytree", "subsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DataError(f"{name} must be in (0, 1], got {v}")
        if self.learning_rate < 0:
            raise DataError("learning_rate must be >= 0")
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1")
        if self.n_estimators < 1:
            raise DataError("n_estimators must be >= 1")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise DataError("reg_lambda, gamma and min_child_weight must be >= 0")
        if self.max_delta_step < 0:
            raise DataError("max_delta_step must be >= 0")
        if self.scale_pos_weight <= 0:
            raise DataError("scale_pos_weight must be > 0")
        if self.seed < 0:
            raise DataError("seed must be non-negative")

    def numeric(self):
        """Snapshot without the knobs that cannot change results."""
        doc = asdict(self)
        doc.pop("silent")
        doc.pop("n_jobs")
        return doc

    @classmethod
    def from_mapping(cls, doc):
        names = {f.name: f.type for f in fields(cls)}
        unknown = set(doc) - set(names)
        if unknown:
            raise DataError(f"unknown gbt parameters {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class GbtModel:
    trees: tuple
    base_margin: float
    params: GbtParams
    d: int
    names: tuple = ()

    def to_dict(self):
        return {
            "kind": "gbt",
            "names": list(self.names),
            "d": self.d,
            "base_margin": self.base_margin,
            "params": self.params.numeric(),
            "trees": [t.to_list() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            tuple(Tree.from_list(t) for t in doc["trees"]),
            float(doc["base_margin"]),
            GbtParams.from_mapping(doc["params"]),
            int(doc["d"]),
            tuple(doc.get("names", ())),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def grad_hess(y, p, scale_pos_weight=1.0):
    """First and second derivative of the logistic loss in the margin.

    Positive-class rows are multiplied by ``scale_pos_weight``. Works on
    scalars and arrays.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    w = np.where(y == 1, scale_pos_weight, 1.0)
    g = (p - y) * w
    h = p * (1.0 - p) * w
    if g.ndim == 0:
        return float(g), float(h)
    return g, h


def _score(G, H, lam):
    return G * G / (H + lam) if H + lam > 0 else 0.0


def split_gain(GL, HL, GR, HR, lam, gamma):
    """Loss reduction of splitting a node into (L, R), minus ``gamma``."""
    G = GL + GR
    H = HL + HR
    return 0.5 * (_score(GL, HL, lam) + _score(GR, HR, lam) - _score(G, H, lam)) - gamma


def leaf_weight(G, H, lam, max_delta_step=0.0):
    if H + lam <= 0:
        return 0.0
    w = -G / (H + lam)
    if max_delta_step > 0:
        w = min(max(w, -max_delta_step), max_delta_step)
    return w + 0.0  # normalise -0.0


def _n_take(frac, n):
    return max(1, int(round(frac * n)))


def _round_rng(seed, rnd):
    return np.random.default_rng(np.random.SeedSequence([seed, rnd]))


def _grow(Xv, g, h, rows, tree_feats, params, rng):
    lam = params.reg_lambda
    b = TreeBuilder()
    level_feats = {}

    def feats_at(depth):
        # one column draw per depth level, taken from the tree's columns
        if depth not in level_feats:
            k = _n_take(params.colsample_bylevel, tree_feats.size)
            if k < tree_feats.size:
                level_feats[depth] = np.sort(rng.choice(tree_feats, k, replace=False)).astype(np.intp)
            else:
                level_feats[depth] = tree_feats
        return level_feats[depth]

    def grow(rows, depth):
        G = float(np.sum(g[rows]))
        H = float(np.sum(h[rows]))
        n = rows.shape[0]
        w = leaf_weight(G, H, lam, params.max_delta_step) * params.learning_rate
        if depth >= params.max_depth or n < 2:
            return b.add_leaf(w, H, n)
        f, thr, gain, _, _ = _kernels.gbt_best_split(
            Xv, rows, g, h, feats_at(depth), G, H, lam, params.gamma, params.min_child_weight
        )
        if f < 0:
            return b.add_leaf(w, H, n)
        node = b.add_split(f, thr, gain, H, n)
        mask = Xv[rows, f] < thr
        li = grow(rows[mask], depth + 1)
        ri = grow(rows[~mask], depth + 1)
        b.set_children(node, li, ri)
        return node

    grow(rows, 0)
    return b.build()


def fit_gbt(X, y, params: GbtParams = GbtParams()) -> GbtModel:
    """Boost ``params.n_estimators`` trees from a zero base margin.

    Every round draws its row subsample (without replacement) and tree
    columns from a generator seeded by ``(seed, round)``; each depth level
    then samples ``colsample_bylevel`` of the tree's columns.
    """
    Xv = check_matrix(X)
    y = as_labels(y)
    n, d = Xv.shape
    if n < 2:
        raise DataError("need at least 2 rows")
    if n != y.shape[0]:
        raise DataError(f"X has {n} rows but y has {y.shape[0]}")
    base = 0.0
    margin = np.full(n, base)
    trees = []
    all_rows = np.arange(n, dtype=np.intp)
    all_feats = np.arange(d, dtype=np.intp)
    for rnd in range(params.n_estimators):
        p = sigmoid(margin)
        # keep p strictly inside (0, 1) once margins saturate
        p = np.clip(p, 1e-16, 1.0 - 1e-16)
        g, h = grad_hess(y, p, params.scale_pos_weight)
        rng = _round_rng(params.seed, rnd)
        k = _n_take(params.subsample, n)
        rows = np.sort(rng.choice(n, k, replace=False)).astype(np.intp) if k < n else all_rows
        kf = _n_take(params.colsample_bytree, d)
        tree_feats = np.sort(rng.choice(d, kf, replace=False)).astype(np.intp) if kf < d else all_feats
        tree = _grow(Xv, g, h, rows, tree_feats, params, rng)
        margin = margin + tree.predict(Xv)
        if not np.all(np.isfinite(margin)):
            raise NumericError(f"margins became non-finite in boosting round {rnd}")
        trees.append(tree)
    return GbtModel(tuple(trees), base, params, d, tuple(getattr(X, "names", ())))


def predict_margin(model: GbtModel, X):
    Xv = check_matrix(X, model.d)
    out = np.full(Xv.shape[0], model.base_margin)
    for t in model.trees:
        out += t.predict(Xv)
    return out


def predict_proba_gbt(model: GbtModel, X):
    return sigmoid(predict_margin(model, X))


def predict_label(model: GbtModel, X):
    return (predict_proba_gbt(model, X) >= 0.5).astype(np.int64)


def feature_importance(model: GbtModel, kind="gain"):
    """Per-feature total split gain, split count, or hessian cover at splits."""
    if kind not in ("gain", "weight", "cover"):
        raise ValueError(f"unknown importance kind {kind!r}")
    out = {j: 0.0 for j in range(model.d)}
    for t in model.trees:
        for i in np.flatnonzero(t.feature >= 0):
            f = int(t.feature[i])
            if kind == "gain":
                out[f] += float(t.gain[i])
            elif kind == "weight":
                out[f] += 1.0
            else:
                out[f] += float(t.cover[i])
    return out
