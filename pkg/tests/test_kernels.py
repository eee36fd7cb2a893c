import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from churnkit import _kernels
from churnkit.gbt import GbtParams, fit_gbt
from churnkit.tree import ForestConfig, fit_forest

from helpers import random_tree

needs_core = pytest.mark.skipif("cython" not in _kernels.BACKENDS, reason="compiled core not built")
py = _kernels.BACKENDS["python"]


def core():
    return _kernels.BACKENDS["cython"]


def test_backend_switching():
    before = _kernels.backend_name()
    with _kernels.use_backend("python"):
        assert _kernels.backend_name() == "python"
    assert _kernels.backend_name() == before
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


def test_weight_table():
    from math import factorial

    W = _kernels.shap_weight_table(3)
    assert W[1, 0] == 1.0 and W[1, 1] == 0.5
    assert np.all(W[0] == 0)
    for a in range(1, 5):
        for c in range(5):
            assert W[a, c] == pytest.approx(factorial(a - 1) * factorial(c) / factorial(a + c), rel=1e-15)


@needs_core
@settings(max_examples=60)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 40), d=st.integers(1, 4))
def test_gbt_split_parity(seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, (n, d)).astype(np.float64)
    g = rng.normal(size=n)
    h = rng.uniform(0.01, 0.25, n)
    rows = np.sort(rng.choice(n, max(1, n - 2), replace=False)).astype(np.intp)
    feats = np.arange(d, dtype=np.intp)
    G, H = float(np.sum(g[rows])), float(np.sum(h[rows]))
    args = (X, rows, g, h, feats, G, H, float(rng.uniform(0, 2)), float(rng.uniform(0, 0.1)), 0.05)
    assert py.gbt_best_split(*args) == core().gbt_best_split(*args)


@needs_core
@settings(max_examples=60)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 40), d=st.integers(1, 4), leaf=st.integers(1, 4))
def test_gini_split_parity(seed, n, d, leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, (n, d)).astype(np.float64)
    y = rng.integers(0, 2, n).astype(np.int64)
    rows = np.arange(n, dtype=np.intp)
    feats = np.arange(d, dtype=np.intp)
    args = (X, rows, y, feats, leaf, 1e-12)
    assert py.gini_best_split(*args) == core().gini_best_split(*args)


@needs_core
@settings(max_examples=40)
@given(seed=st.integers(0, 2**31))
def test_predict_and_shap_parity(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    t = random_tree(rng, d, int(rng.integers(1, 6)))
    X = rng.uniform(size=(20, d))
    arrays = (t.feature, t.threshold, t.left, t.right, t.value)
    np.testing.assert_array_equal(py.predict_tree(*arrays, X), core().predict_tree(*arrays, X))
    W = _kernels.shap_weight_table(t.depth())
    B = rng.uniform(size=(7, d))
    a, b = np.zeros(d), np.zeros(d)
    py.interventional_tree_shap(*arrays, X[0], B, W, a)
    core().interventional_tree_shap(*arrays, X[0], B, W, b)
    np.testing.assert_array_equal(a, b)


@needs_core
def test_fitted_models_identical_across_backends(synth_split):
    X, y = synth_split.X_train, synth_split.y_train
    out = {}
    for name in ("python", "cython"):
        with _kernels.use_backend(name):
            out[name] = (
                fit_gbt(X, y, GbtParams(n_estimators=8)).dumps(),
                fit_forest(X, y, ForestConfig(n_trees=4)).dumps(),
            )
    assert out["python"] == out["cython"]
