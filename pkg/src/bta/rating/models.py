"""Logistic regression and factorization machines trained on soft labels."""

import math

import numpy as np

from ..errors import ConfigError, DataError
from ..numerics import AdamState, ParameterStore, adam_step, cross_entropy, sigmoid
from ..model.training import minibatches

FM_FACTORS = 8


def soft_log_loss(p, y):
    """Mean of -y ln p - (1 - y) ln(1 - p) with y in [0, 1]."""
    return float(np.mean(cross_entropy(p, y)))


class LogisticRegression:
    def __init__(self, n_features):
        self.store = ParameterStore()
        self.store.add("w", np.zeros(n_features))
        self.store.add("b", np.zeros(1))

    def logits(self, X):
        return X @ self.store.params["w"] + self.store.params["b"][0]

    def predict_proba(self, X):
        return sigmoid(self.logits(X))

    def _backward(self, X, g):
        self.store.accumulate("w", X.T @ g)
        self.store.accumulate("b", np.array([g.sum()]))

    def loss_and_grads(self, X, y):
        self.store.zero_grad()
        y = np.asarray(y, dtype=np.float64)
        p = self.predict_proba(X)
        # d(log-loss)/d(logit) = p - y for the sigmoid link
        self._backward(X, (p - y) / len(y))
        return soft_log_loss(p, y)


class FactorizationMachine(LogisticRegression):
    """Degree-2 FM; pairwise term computed in O(k n) via the square-of-sums identity."""

    def __init__(self, n_features, k=FM_FACTORS, rng=None, init_scale=0.01):
        if k < 1:
            raise ConfigError("factor count k must be at least 1")
        super().__init__(n_features)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.store.add("V", init_scale * rng.standard_normal((n_features, k)))

    def pairwise(self, X):
        V = self.store.params["V"]
        XV = X @ V
        return 0.5 * np.sum(XV ** 2 - (X ** 2) @ (V ** 2), axis=1)

    def logits(self, X):
        return super().logits(X) + self.pairwise(X)

    def _backward(self, X, g):
        super()._backward(X, g)
        V = self.store.params["V"]
        XV = X @ V
        self.store.accumulate("V", X.T @ (g[:, None] * XV) - V * ((X ** 2).T @ g)[:, None])


def pairwise_naive(X, V):
    """sum_{i<j} <v_i, v_j> x_i x_j by explicit double loop."""
    X = np.atleast_2d(X)
    out = np.zeros(len(X))
    n = X.shape[1]
    for r, x in enumerate(X):
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                total += float(V[i] @ V[j]) * x[i] * x[j]
        out[r] = total
    return out


def train_model(model, X, y, X_valid=None, y_valid=None, lr=0.05, epochs=200, batch_size=64,
                patience=20, rng=None):
    """Adam on soft log-loss.

    With a validation set the parameters of the epoch with the lowest
    validation loss are restored at the end, and training stops after
    ``patience`` epochs without improvement. Returns per-epoch training losses.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise DataError("empty training set")
    rng = rng if rng is not None else np.random.default_rng(0)
    state = AdamState(lr=lr)
    history = []
    best, best_params, stale = math.inf, None, 0
    for epoch in range(epochs):
        total = 0.0
        for idx in minibatches(len(y), batch_size, rng):
            total += model.loss_and_grads(X[idx], y[idx]) * len(idx)
            adam_step(model.store, state)
        history.append(total / len(y))
        if X_valid is None:
            continue
        val = soft_log_loss(model.predict_proba(X_valid), y_valid)
        if val < best - 1e-9:
            best, stale = val, 0
            best_params = {n: p.copy() for n, p in model.store.params.items()}
        else:
            stale += 1
            if stale >= patience:
                break
    if best_params is not None:
        for n, p in best_params.items():
            model.store.params[n][...] = p
    return history
