"""CART classification trees, bootstrap random forests, and the array-backed
tree structure shared with the boosted learner and the explainer."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .data import as_labels
from .errors import DataError, DimensionError

# Gini decreases at or below this are treated as zero (float noise on exact ties).
MIN_DECREASE = 1e-12


@dataclass(frozen=True)
class Tree:
    """Binary tree stored as preorder node arrays.

    Leaves have ``feature == -1``. A row goes left iff
    ``x[feature] < threshold``. ``cover`` is the row count (CART) or the
    hessian sum (boosting) of training rows reaching the node; ``gain`` is
    the split score recorded at internal nodes.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def is_leaf(self):
        return self.feature < 0

    def depth(self):
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))

        return rec(0)

    def predict(self, X):
        return _kernels.predict_tree(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    def apply(self, X):
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(self.n_nodes):
            active = self.feature[node] >= 0
            if not active.any():
                break
            nd = node[active]
            go_left = X[active, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
        return node

    def scaled(self, factor):
        return Tree(
            self.feature, self.threshold, self.left, self.right,
            self.value * factor, self.cover, self.n_samples, self.gain,
        )

    def to_list(self):
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({
                    "id": i,
                    "leaf": float(self.value[i]),
                    "cover": float(self.cover[i]),
                    "n_samples": int(self.n_samples[i]),
                })
            else:
                nodes.append({
                    "id": i,
                    "feature": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "left": int(self.left[i]),
                    "right": int(self.right[i]),
                    "gain": float(self.gain[i]),
                    "cover": float(self.cover[i]),
                    "n_samples": int(self.n_samples[i]),
                })
        return nodes

    @classmethod
    def from_list(cls, nodes):
        b = TreeBuilder()
        for i, nd in enumerate(nodes):
            if nd.get("id", i) != i:
                raise DataError("tree nodes must be listed in preorder with consecutive ids")
            if "leaf" in nd:
                b.add_leaf(nd["leaf"], nd["cover"], nd["n_samples"])
            else:
                j = b.add_split(nd["feature"], nd["threshold"], nd["gain"], nd["cover"], nd["n_samples"])
                b.set_children(j, nd["left"], nd["right"])
        return b.build()

    @classmethod
    def leaf(cls, value, cover=0.0, n_samples=0):
        b = TreeBuilder()
        b.add_leaf(value, cover, n_samples)
        return b.build()


class TreeBuilder:
    """Accumulates nodes in preorder; children are linked after the fact."""

    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.cover, self.n_samples, self.gain = [], [], [], []

    def _add(self, feature, threshold, value, gain, cover, n_samples):
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.gain.append(float(gain))
        self.cover.append(float(cover))
        self.n_samples.append(int(n_samples))
        return len(self.feature) - 1

    def add_leaf(self, value, cover, n_samples):
        return self._add(-1, 0.0, value, 0.0, cover, n_samples)

    def add_split(self, feature, threshold, gain, cover, n_samples, value=0.0):
        return self._add(feature, threshold, value, gain, cover, n_samples)

    def set_children(self, node, left, right):
        self.left[node] = int(left)
        self.right[node] = int(right)

    def build(self):
        t = Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
            np.asarray(self.cover, dtype=np.float64),
            np.asarray(self.n_samples, dtype=np.int64),
            np.asarray(self.gain, dtype=np.float64),
        )
        internal = t.feature >= 0
        if np.any(t.left[internal] < 0) or np.any(t.right[internal] < 0):
            raise DataError("internal tree node without two children")
        for arr in t.__dict__.values():
            arr.setflags(write=False)
        return t


def gini(counts):
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 8
    min_samples_leaf: int = 5
    mtry: int | None = None


def check_matrix(X, d=None):
    Xv = X.values if hasattr(X, "names") and hasattr(X, "values") else X
    Xv = np.ascontiguousarray(Xv, dtype=np.float64)
    if Xv.ndim != 2:
        raise DataError("expected a 2-D feature matrix")
    if d is not None and Xv.shape[1] != d:
        raise DimensionError(d, Xv.shape[1])
    if not np.all(np.isfinite(Xv)):
        raise DataError("feature matrix contains non-finite values")
    return Xv


def _grow_cart(Xv, y, rows, config, rng):
    d = Xv.shape[1]
    mtry = d if config.mtry is None else config.mtry
    if not 1 <= mtry <= d:
        raise DataError(f"mtry must be in [1, {d}], got {mtry}")
    all_features = np.arange(d, dtype=np.intp)
    b = TreeBuilder()

    def grow(rows, depth):
        n = rows.shape[0]
        pos = int(y[rows].sum())
        value = pos / n
        if depth >= config.max_depth or pos == 0 or pos == n or n < 2 * config.min_samples_leaf:
            return b.add_leaf(value, n, n)
        if mtry < d:
            feats = np.sort(rng.choice(d, mtry, replace=False)).astype(np.intp)
        else:
            feats = all_features
        f, thr, dec = _kernels.gini_best_split(
            Xv, rows, y, feats, float(config.min_samples_leaf), MIN_DECREASE
        )
        if f < 0:
            return b.add_leaf(value, n, n)
        node = b.add_split(f, thr, dec, n, n, value)
        mask = Xv[rows, f] < thr
        li = grow(rows[mask], depth + 1)
        ri = grow(rows[~mask], depth + 1)
        b.set_children(node, li, ri)
        return node

    grow(np.ascontiguousarray(rows, dtype=np.intp), 0)
    return b.build()


def fit_tree(X, y, config: TreeConfig = TreeConfig(), rng=None) -> Tree:
    """Greedy CART on Gini impurity. Leaves hold the class-1 fraction.

    Thresholds are midpoints between consecutive distinct values; ties in the
    impurity decrease go to the lowest feature index, then lowest threshold.
    """
    Xv = check_matrix(X)
    y = as_labels(y)
    if Xv.shape[0] < 1:
        raise DataError("need at least one row")
    if Xv.shape[0] != y.shape[0]:
        raise DataError(f"X has {Xv.shape[0]} rows but y has {y.shape[0]}")
    if rng is None:
        rng = np.random.default_rng(0)
    return _grow_cart(Xv, y, np.arange(Xv.shape[0]), config, rng)


def predict_tree(tree: Tree, X, d=None):
    return tree.predict(check_matrix(X, d))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    mtry: int | None = None  # None: ceil(sqrt(d))
    max_depth: int = 12
    min_samples_leaf: int = 1
    seed: int = 0
    bootstrap: bool = True


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    tree_seeds: tuple
    mtry: int
    d: int
    names: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def n_trees(self):
        return len(self.trees)

    def to_dict(self):
        return {
            "kind": "forest",
            "names": list(self.names),
            "d": self.d,
            "mtry": self.mtry,
            "config": self.config,
            "tree_seeds": list(self.tree_seeds),
            "trees": [t.to_list() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            tuple(Tree.from_list(t) for t in doc["trees"]),
            tuple(doc["tree_seeds"]),
            int(doc["mtry"]),
            int(doc["d"]),
            tuple(doc.get("names", ())),
            dict(doc.get("config", {})),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def tree_seed(seed, i):
    """Per-tree seed; depends only on (seed, i), never on scheduling."""
    return int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])


def fit_forest(X, y, config: ForestConfig = ForestConfig(), threads=1) -> ForestModel:
    Xv = check_matrix(X)
    y = as_labels(y)
    n, d = Xv.shape
    if n < 2:
        raise DataError("need at least 2 rows")
    if n != y.shape[0]:
        raise DataError(f"X has {n} rows but y has {y.shape[0]}")
    if config.n_trees < 1:
        raise DataError("n_trees must be >= 1")
    mtry = math.ceil(math.sqrt(d)) if config.mtry is None else config.mtry
    if not 1 <= mtry <= d:
        raise DataError(f"mtry must be in [1, {d}], got {mtry}")
    tcfg = TreeConfig(config.max_depth, config.min_samples_leaf, mtry)
    seeds = tuple(tree_seed(config.seed, i) for i in range(config.n_trees))

    def one(s):
        rng = np.random.default_rng(s)
        rows = rng.integers(0, n, n) if config.bootstrap else np.arange(n)
        return _grow_cart(Xv, y, rows, tcfg, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trees = tuple(ex.map(one, seeds))
    else:
        trees = tuple(one(s) for s in seeds)
    return ForestModel(trees, seeds, mtry, d, tuple(getattr(X, "names", ())), asdict(config))


def predict_forest(model: ForestModel, X):
    Xv = check_matrix(X, model.d)
    total = np.zeros(Xv.shape[0])
    for t in model.trees:
        total += t.predict(Xv)
    return total / model.n_trees
