"""Classification and ranking metrics."""

import math
import warnings

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError


class UndefinedMetricWarning(UserWarning):
    """A degenerate input made a metric fall back to its conventional value."""


def auc(scores, labels):
    """Probability that a random positive outscores a random negative.

    Ties count one half. Computed from the Mann-Whitney rank sum.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != len(labels):
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def f1(probabilities, labels, threshold=0.5):
    """F1 of the satisfied class with predictions ``probability >= threshold``.

    Returns 0 with an :class:`UndefinedMetricWarning` when there are no true
    positives.
    """
    pred = np.asarray(probabilities, dtype=np.float64) >= threshold
    truth = np.asarray(labels) == 1
    return f1_from_predictions(pred, truth)


def f1_from_predictions(pred, truth):
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    if tp == 0:
        warnings.warn("F1 is ill-defined without true positives; returning 0", UndefinedMetricWarning,
                      stacklevel=2)
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def dcg_at_k(relevances, k):
    rel = np.asarray(relevances, dtype=np.float64)[:k]
    discounts = np.log2(np.arange(2, len(rel) + 2))
    return float(np.sum((2.0 ** rel - 1.0) / discounts))


def ndcg_at_k(relevances, k):
    """NDCG with gain 2^rel - 1 and discount 1/log2(rank + 1).

    ``relevances`` are the grades in ranked order. All-zero grades give 0.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    ideal = dcg_at_k(sorted(relevances, reverse=True), k)
    if ideal == 0.0:
        return 0.0
    return dcg_at_k(relevances, k) / ideal


def map_at_k(relevances, k):
    """Average precision at k; grades >= 1 count as relevant.

    Normalized by min(k, number of relevant items). No relevant items gives 0
    with an :class:`UndefinedMetricWarning`.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rel = np.asarray(relevances) >= 1
    total = int(rel.sum())
    if total == 0:
        warnings.warn("no relevant items; average precision is 0", UndefinedMetricWarning, stacklevel=2)
        return 0.0
    hits = 0
    acc = 0.0
    for i, r in enumerate(rel[:k], start=1):
        if r:
            hits += 1
            acc += hits / i
    return acc / min(k, total)


def safe_auc(scores, labels):
    """AUC, or NaN when the labels hold a single class."""
    try:
        return auc(scores, labels)
    except UndefinedMetricError:
        return math.nan
