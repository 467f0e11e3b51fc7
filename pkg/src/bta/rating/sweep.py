"""Sweep over the true-label ratio, with and without estimated labels."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..metrics import auc
from ..seeding import STREAM_INIT, STREAM_SHUFFLE, derive_rng
from .data import mix_labels, split_interactions
from .models import FM_FACTORS, FactorizationMachine, LogisticRegression, train_model

DEFAULT_ALPHAS = (0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
MODELS = ("LR", "FM")
CONDITIONS = ("T", "T+S")


@dataclass
class SweepRow:
    model: str
    alpha: float
    condition: str
    auc: float


def make_model(name, n_features, k=FM_FACTORS, rng=None):
    if name == "LR":
        return LogisticRegression(n_features)
    if name == "FM":
        return FactorizationMachine(n_features, k, rng)
    raise ConfigError(f"unknown rating model {name!r}; choose from {MODELS}")


def fit_and_score(data, split, name, alpha, condition, seed=0, k=FM_FACTORS, lr=0.05, epochs=200):
    """Train one configuration; returns test AUC against true labels, or None without training data.

    ``T`` trains on the true-labeled subset only, ``T+S`` adds the estimated
    labels for the rest of the training split.
    """
    if condition not in CONDITIONS:
        raise ConfigError(f"unknown condition {condition!r}; choose from {CONDITIONS}")
    train = split.train
    targets, is_true = mix_labels(data.labels[train], data.estimates[train], alpha, seed)
    rows = np.arange(len(train)) if condition == "T+S" else np.flatnonzero(is_true)
    if len(rows) == 0:
        return None
    key = (name, f"{alpha:.6f}", condition)
    model = make_model(name, data.n_features, k, derive_rng(seed, STREAM_INIT, *key))
    X = data.features(train[rows])
    train_model(model, X, targets[rows], data.features(split.valid), data.labels[split.valid],
                lr=lr, epochs=epochs, rng=derive_rng(seed, STREAM_SHUFFLE, *key))
    return auc(model.predict_proba(data.features(split.test)), data.labels[split.test])


def run_alpha_sweep(data, alphas=DEFAULT_ALPHAS, models=MODELS, conditions=CONDITIONS, seed=0,
                    k=FM_FACTORS, lr=0.05, epochs=200):
    """Rows of (model, alpha, condition, AUC); configurations without training data are skipped."""
    split = split_interactions(len(data), seed)
    rows = []
    for name in models:
        for alpha in alphas:
            for condition in conditions:
                score = fit_and_score(data, split, name, alpha, condition, seed, k, lr, epochs)
                if score is not None:
                    rows.append(SweepRow(name, float(alpha), condition, score))
    return rows


def sweep_table(rows):
    lines = ["model,alpha,condition,auc"]
    for r in rows:
        lines.append(f"{r.model},{r.alpha:.2f},{r.condition},{r.auc:.6f}")
    return "\n".join(lines) + "\n"
