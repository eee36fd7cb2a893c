import numpy as np
import pytest
from hypothesis import given, strategies as st

from churnkit.errors import DimensionError
from churnkit.linear import (
    LogisticConfig,
    LogisticModel,
    fit_logistic,
    loss_and_grad,
    predict_proba_logistic,
    sigmoid,
)


def numeric_grad(w, b, Z, y, l2, eps=1e-6):
    theta = np.r_[w, b]
    out = np.empty_like(theta)
    for k in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[k] += eps
        dn[k] -= eps
        fu = loss_and_grad(up[:-1], up[-1], Z, y, l2)[0]
        fd = loss_and_grad(dn[:-1], dn[-1], Z, y, l2)[0]
        out[k] = (fu - fd) / (2 * eps)
    return out


def gradient_rel_error(seed):
    rng = np.random.default_rng(seed)
    n, d = rng.integers(2, 21), rng.integers(1, 6)
    Z = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n).astype(float)
    w = rng.normal(size=d)
    b = float(rng.normal())
    l2 = float(rng.uniform(0, 1))
    _, gw, gb = loss_and_grad(w, b, Z, y, l2)
    analytic = np.r_[gw, gb]
    fd = numeric_grad(w, b, Z, y, l2)
    return np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    assert gradient_rel_error(seed) <= 1e-5


def test_all_negative_labels():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    model = fit_logistic(X, np.zeros(30, dtype=int))
    assert np.all(predict_proba_logistic(model, X) < 0.5)


def test_separable_1d():
    X = np.array([[-1.0], [1.0]])
    model = fit_logistic(X, [0, 1], LogisticConfig(l2=0.0))
    p = predict_proba_logistic(model, X)
    assert ((p >= 0.5).astype(int) == [0, 1]).all()


def test_zero_iterations():
    X = np.random.default_rng(1).normal(size=(10, 4))
    model = fit_logistic(X, np.arange(10) % 2, LogisticConfig(max_iters=0))
    assert np.all(model.weights == 0) and model.bias == 0
    assert np.all(predict_proba_logistic(model, X) == 0.5)


def test_sigmoid_contract():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    # 1 - 1e-20 rounds to 1.0 in float64; the contract is saturation without overflow
    assert 1.0 - sigmoid(np.array([50.0]))[0] <= 1e-20
    with np.errstate(over="raise"):
        assert sigmoid(np.array([-1000.0, 1000.0])).tolist() == [0.0, 1.0]
    z = np.linspace(-30, 30, 61)
    np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0, atol=1e-15)


def test_dimension_mismatch():
    model = fit_logistic(np.zeros((4, 2)), [0, 1, 0, 1])
    with pytest.raises(DimensionError):
        predict_proba_logistic(model, np.zeros((3, 3)))


@given(seed=st.integers(0, 10_000), lr=st.floats(0.05, 50.0))
def test_accepted_losses_non_increasing(seed, lr):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 3)) * rng.uniform(0.1, 10, 3)
    y = (X[:, 0] + rng.normal(size=25) > 0).astype(int)
    trace = []
    fit_logistic(X, y, LogisticConfig(learning_rate=lr, max_iters=60), trace=trace)
    assert all(b <= a for a, b in zip(trace, trace[1:]))


@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
def test_standardization_absorbs_scale(seed, scale):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 3))
    y = (X[:, 1] > 0).astype(int)
    X2 = X.copy()
    X2[:, 1] *= scale
    cfg = LogisticConfig(max_iters=50)
    p1 = predict_proba_logistic(fit_logistic(X, y, cfg), X)
    p2 = predict_proba_logistic(fit_logistic(X2, y, cfg), X2)
    np.testing.assert_allclose(p1, p2, atol=1e-9)


def test_roundtrip():
    X = np.random.default_rng(2).normal(size=(15, 2))
    model = fit_logistic(X, np.arange(15) % 2)
    again = LogisticModel.from_dict(model.to_dict())
    assert again.dumps() == model.dumps()
    np.testing.assert_array_equal(predict_proba_logistic(again, X), predict_proba_logistic(model, X))
