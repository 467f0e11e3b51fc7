"""Topography-invariant reference: a two-layer perceptron on flattened features."""

import logging
import math

import numpy as np

from ..eeg.signals import zscore_channels
from ..errors import DataError
from ..numerics import (ParameterStore, cross_entropy, cross_entropy_grad, dense, dense_backward,
                        gelu, gelu_backward, softmax, softmax_backward)
from ..seeding import STREAM_INIT, STREAM_SHUFFLE, derive_rng
from .training import _check_fold, _collect, _evaluate_fold, _run_folds, fit_classifier

log = logging.getLogger(__name__)

MLP_HIDDEN = 64


def flatten_features(temporal, spectral):
    """concat(zscore(X^t), X^s) per sample, flattened to (n, E*N + E*B)."""
    xt = zscore_channels(np.asarray(temporal, dtype=np.float64))
    xs = np.asarray(spectral, dtype=np.float64)
    n = xt.shape[0]
    return np.concatenate([xt.reshape(n, -1), xs.reshape(n, -1)], axis=1)


class MlpClassifier:
    def __init__(self, store):
        self.store = store

    @classmethod
    def initialize(cls, n_features, hidden=MLP_HIDDEN, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        st = ParameterStore()
        b1, b2 = 1.0 / math.sqrt(n_features), 1.0 / math.sqrt(hidden)
        st.add("hidden.weight", rng.uniform(-b1, b1, size=(n_features, hidden)))
        st.add("hidden.bias", np.zeros(hidden))
        st.add("out.weight", rng.uniform(-b2, b2, size=(hidden, 2)))
        st.add("out.bias", np.zeros(2))
        st.add_buffer("norm.mean", np.zeros(n_features))
        st.add_buffer("norm.std", np.ones(n_features))
        return cls(st)

    def fit_normalization(self, X):
        self.store.buffers["norm.mean"] = X.mean(axis=0)
        self.store.buffers["norm.std"] = np.maximum(X.std(axis=0), 1e-6)

    def _forward(self, X):
        p, b = self.store.params, self.store.buffers
        Xn = (X - b["norm.mean"]) / b["norm.std"]
        A = dense(Xn, p["hidden.weight"], p["hidden.bias"])
        G = gelu(A)
        probs = softmax(dense(G, p["out.weight"], p["out.bias"]))
        return probs, (Xn, A, G)

    def predict_proba(self, X):
        return self._forward(X)[0][:, 1]

    def loss_and_grads(self, X, y):
        st = self.store
        st.zero_grad()
        y = np.asarray(y, dtype=np.float64)
        probs, (Xn, A, G) = self._forward(X)
        p = probs[:, 1]
        dprobs = np.zeros_like(probs)
        dprobs[:, 1] = cross_entropy_grad(p, y) / len(y)
        dlogits = softmax_backward(dprobs, probs)
        dG, dW2, db2 = dense_backward(dlogits, G, st.params["out.weight"])
        _, dW1, db1 = dense_backward(gelu_backward(dG, A), Xn, st.params["hidden.weight"])
        st.accumulate("out.weight", dW2)
        st.accumulate("out.bias", db2)
        st.accumulate("hidden.weight", dW1)
        st.accumulate("hidden.bias", db1)
        return float(np.mean(cross_entropy(p, y)))


def _mlp_fold(args):
    dataset, plan, config, X, fold = args
    train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
    _check_fold(dataset, train_idx, test_idx, fold)
    model = MlpClassifier.initialize(X.shape[1], rng=derive_rng(config.seed, STREAM_INIT, "mlp", fold))
    model.fit_normalization(X[train_idx])
    rng = derive_rng(config.seed, STREAM_SHUFFLE, "mlp", fold)
    history = fit_classifier(model, (X[train_idx],), dataset.labels[train_idx], config.lr,
                             config.batch_size, config.epochs, config.patience, rng,
                             label=f"mlp fold {fold}")
    result = _evaluate_fold(fold, model.predict_proba(X[test_idx]), dataset.labels[test_idx], history)
    log.info("mlp fold %d: auc %.4f f1 %.4f", fold, result.auc, result.f1)
    return result, model.store


def baseline_mlp(dataset, plan, config, jobs=1):
    """Cross-validate the MLP under the same folds, optimizer and stopping rule as BTA."""
    if len(plan.assignment) != len(dataset):
        raise DataError("fold plan does not cover the dataset")
    X = flatten_features(dataset.temporal, dataset.spectral)
    args = [(dataset, plan, config, X, fold) for fold in range(plan.k)]
    return _collect(_run_folds(_mlp_fold, args, jobs))
