"""Shapley attributions under the interventional value function

    v(S) = mean over background rows b of f(x_S, b_rest)

computed two ways: brute-force subset enumeration for any model, and a
polynomial per-background-row tree traversal for tree ensembles. Values are
in the model's raw output space (log-odds for boosted trees).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataError, UnsupportedModelError
from .gbt import GbtModel, predict_margin
from .linear import LogisticModel, decision_function
from .tree import ForestModel, Tree, check_matrix, predict_forest

MAX_EXACT_FEATURES = 20


@dataclass(frozen=True)
class ShapResult:
    base_value: float
    values: np.ndarray  # n x d
    names: tuple
    margins: np.ndarray  # model output of each explained row

    @property
    def n(self):
        return self.values.shape[0]


def model_output(model, X):
    """Raw output the attributions add up to: margin, or forest/tree probability."""
    if isinstance(model, GbtModel):
        return predict_margin(model, X)
    if isinstance(model, ForestModel):
        return predict_forest(model, X)
    if isinstance(model, Tree):
        return model.predict(check_matrix(X))
    if isinstance(model, LogisticModel):
        return decision_function(model, X)
    raise UnsupportedModelError(f"no output function for {type(model).__name__}")


def _background(background, d=None):
    B = check_matrix(background)
    if B.shape[0] == 0:
        raise DataError("background set is empty")
    if d is not None and B.shape[1] != d:
        raise DataError(f"background has {B.shape[1]} features, instance has {d}")
    return B


def make_background(X, size=256, seed=0):
    """At most ``size`` rows of ``X``, chosen by a seeded draw without replacement."""
    Xv = check_matrix(X)
    if Xv.shape[0] <= size:
        return Xv
    idx = np.sort(np.random.default_rng(seed).choice(Xv.shape[0], size, replace=False))
    return np.ascontiguousarray(Xv[idx])


def _shapley_weights(d):
    return np.array(
        [math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) for s in range(d)]
    )


def exact_shapley(predict, background, x):
    """Shapley values by enumerating all 2^d coalitions.

    ``predict`` maps an (m, d) array to m outputs. Returns ``(phi, base)``
    with ``base = v(empty set)``.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    d = x.shape[0]
    if d > MAX_EXACT_FEATURES:
        raise DataError(f"exact Shapley enumeration limited to {MAX_EXACT_FEATURES} features, got {d}")
    B = _background(background, d)
    nb = B.shape[0]
    n_sub = 1 << d
    masks = ((np.arange(n_sub)[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    v = np.empty(n_sub)
    chunk = max(1, 200_000 // max(nb, 1))
    for start in range(0, n_sub, chunk):
        m = masks[start:start + chunk]
        Z = np.where(m[:, None, :], x[None, None, :], B[None, :, :]).reshape(-1, d)
        out = np.asarray(predict(Z), dtype=np.float64).reshape(m.shape[0], nb)
        v[start:start + m.shape[0]] = out.mean(axis=1)
    weights = _shapley_weights(d)
    sizes = masks.sum(axis=1)
    phi = np.zeros(d)
    ids = np.arange(n_sub)
    for i in range(d):
        without = ids[~masks[:, i]]
        phi[i] = np.sum(weights[sizes[without]] * (v[without | (1 << i)] - v[without]))
    return phi, float(v[0])


def _tree_terms(model):
    """(trees, per-tree scale, constant offset) of a tree-structured model."""
    if isinstance(model, GbtModel):
        return model.trees, 1.0, model.base_margin
    if isinstance(model, ForestModel):
        return model.trees, 1.0 / model.n_trees, 0.0
    if isinstance(model, Tree):
        return (model,), 1.0, 0.0
    raise UnsupportedModelError(
        f"{type(model).__name__} has no tree structure; use exact_shapley "
        f"(limited to {MAX_EXACT_FEATURES} features) instead"
    )


class TreeExplainer:
    """Interventional tree SHAP against a fixed background set."""

    def __init__(self, model, background):
        self.model = model
        self.trees, self.scale, self.offset = _tree_terms(model)
        self.background = _background(background)
        depth = max((t.depth() for t in self.trees), default=0)
        self.W = np.ascontiguousarray(_kernels.shap_weight_table(depth))
        # offset kept outside the mean so an empty ensemble reports it exactly
        total = np.zeros(self.background.shape[0])
        for t in self.trees:
            total += t.predict(self.background)
        self.base_value = float(self.offset + self.scale * np.mean(total))

    @property
    def d(self):
        return self.background.shape[1]

    def shap_row(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64).ravel()
        if x.shape[0] != self.d:
            raise DataError(f"instance has {x.shape[0]} features, background has {self.d}")
        phi = np.zeros(self.d)
        for t in self.trees:
            acc = np.zeros(self.d)
            _kernels.interventional_tree_shap(
                t.feature, t.threshold, t.left, t.right, t.value, x, self.background, self.W, acc
            )
            phi += acc
        return phi * (self.scale / self.background.shape[0])

    def explain(self, X, names=(), threads=1) -> ShapResult:
        Xv = check_matrix(X, self.d)
        if Xv.shape[0] == 0:
            raise DataError("no rows selected to explain")
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                rows = list(ex.map(self.shap_row, Xv))
        else:
            rows = [self.shap_row(x) for x in Xv]
        names = tuple(names or getattr(X, "names", ()) or (f"x{j}" for j in range(self.d)))
        return ShapResult(self.base_value, np.vstack(rows), names, model_output(self.model, Xv))


def tree_shap(model, background, x):
    """Interventional Shapley values of one instance; returns ``(phi, base)``."""
    ex = TreeExplainer(model, background)
    return ex.shap_row(x), ex.base_value


def exact_explain(model, background, X, names=()) -> ShapResult:
    """Brute-force attributions for every row of ``X`` (any model, small d)."""
    Xv = check_matrix(X)
    if Xv.shape[0] == 0:
        raise DataError("no rows selected to explain")

    def f(Z):
        return model_output(model, Z)

    rows, base = [], 0.0
    for x in Xv:
        phi, base = exact_shapley(f, background, x)
        rows.append(phi)
    names = tuple(names or getattr(X, "names", ()) or (f"x{j}" for j in range(Xv.shape[1])))
    return ShapResult(base, np.vstack(rows), names, model_output(model, Xv))


def mean_abs_shap(result: ShapResult):
    """``[(feature, mean |phi|)]`` sorted descending, ties by feature index."""
    if result.n < 1:
        raise DataError("no rows in result")
    means = np.abs(result.values).mean(axis=0)
    order = sorted(range(means.size), key=lambda j: (-means[j], j))
    return [(result.names[j], float(means[j])) for j in order]


def force_plot_data(result: ShapResult, row):
    """Signed contributions of one row, largest magnitude first."""
    if not 0 <= row < result.n:
        raise IndexError(f"row {row} out of range for {result.n} explained rows")
    phi = result.values[row]
    order = sorted((j for j in range(phi.size) if phi[j] != 0), key=lambda j: (-abs(phi[j]), j))
    contributions = [
        {
            "feature": result.names[j],
            "value": float(phi[j]),
            "direction": "positive" if phi[j] > 0 else "negative",
        }
        for j in order
    ]
    return {
        "base": result.base_value,
        "final": float(result.base_value + phi.sum()),
        "margin": float(result.margins[row]),
        "contributions": contributions,
    }
