"""Logistic regression fitted by full-batch gradient descent on standardized features."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import as_labels
from .errors import DataError, DimensionError, NumericError


@dataclass(frozen=True)
class LogisticConfig:
    learning_rate: float = 0.1
    max_iters: int = 500
    l2: float = 1e-4
    tolerance: float = 1e-8


@dataclass(frozen=True)
class LogisticModel:
    names: tuple
    means: np.ndarray
    stds: np.ndarray
    weights: np.ndarray
    bias: float
    n_iter: int = 0

    @property
    def d(self):
        return self.weights.shape[0]

    def to_dict(self):
        return {
            "kind": "logistic",
            "names": list(self.names),
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            tuple(doc["names"]),
            np.asarray(doc["means"], dtype=np.float64),
            np.asarray(doc["stds"], dtype=np.float64),
            np.asarray(doc["weights"], dtype=np.float64),
            float(doc["bias"]),
            int(doc.get("n_iter", 0)),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def sigmoid(z):
    """Overflow-free logistic function; ``sigmoid(0) == 0.5`` exactly."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def standardize_params(X):
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds > 0, stds, 1.0)
    return means, stds


def loss_and_grad(w, b, Z, y, l2):
    """Mean log-loss plus ``l2/2 * ||w||^2`` and its gradient in ``(w, b)``.

    ``Z`` is the already-standardized design matrix.
    """
    s = Z @ w + b
    # log(1 + e^s) - y*s, stable for large |s|
    loss = float(np.mean(np.logaddexp(0.0, s) - y * s)) + 0.5 * l2 * float(w @ w)
    r = sigmoid(s) - y
    n = Z.shape[0]
    gw = Z.T @ r / n + l2 * w
    gb = float(r.sum() / n)
    return loss, gw, gb


def _values(X):
    return X.values if hasattr(X, "values") and hasattr(X, "names") else np.asarray(X, dtype=np.float64)


def fit_logistic(X, y, config: LogisticConfig = LogisticConfig(), trace=None) -> LogisticModel:
    """Gradient descent with step halving whenever a step would raise the loss.

    Stops after ``max_iters`` accepted or rejected steps, or when an accepted
    step improves the loss by less than ``tolerance``. Accepted losses are
    appended to ``trace`` when given.
    """
    names = tuple(getattr(X, "names", ()))
    Xv = np.asarray(_values(X), dtype=np.float64)
    y = as_labels(y).astype(np.float64)
    if Xv.shape[0] < 1:
        raise DataError("need at least one row")
    if Xv.shape[0] != y.shape[0]:
        raise DataError(f"X has {Xv.shape[0]} rows but y has {y.shape[0]}")
    if not names:
        names = tuple(f"x{j}" for j in range(Xv.shape[1]))
    means, stds = standardize_params(Xv)
    Z = (Xv - means) / stds
    w = np.zeros(Xv.shape[1])
    b = 0.0
    lr = config.learning_rate
    loss, gw, gb = loss_and_grad(w, b, Z, y, config.l2)
    if trace is not None:
        trace.append(loss)
    it = 0
    while it < config.max_iters:
        it += 1
        w_new = w - lr * gw
        b_new = b - lr * gb
        new_loss, new_gw, new_gb = loss_and_grad(w_new, b_new, Z, y, config.l2)
        if not np.isfinite(new_loss):
            raise NumericError(f"logistic loss became non-finite at iteration {it}")
        if new_loss > loss:
            lr *= 0.5
            if lr < 1e-12:
                break
            continue
        improvement = loss - new_loss
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        if trace is not None:
            trace.append(loss)
        if improvement < config.tolerance:
            break
    return LogisticModel(names, means, stds, w, float(b), it)


def decision_function(model: LogisticModel, X):
    Xv = np.asarray(_values(X), dtype=np.float64)
    if Xv.ndim != 2 or Xv.shape[1] != model.d:
        raise DimensionError(model.d, Xv.shape[-1] if Xv.ndim else 0)
    return ((Xv - model.means) / model.stds) @ model.weights + model.bias


def predict_proba_logistic(model: LogisticModel, X):
    return sigmoid(decision_function(model, X))
