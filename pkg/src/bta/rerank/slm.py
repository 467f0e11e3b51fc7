"""Relevance-model query expansion with uniform or satisfaction-weighted document priors."""

import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..metrics import map_at_k, ndcg_at_k
from .text import CorpusStats, bm25_score

SMOOTHING_MU = 0.5
DEFAULT_LAMBDA = 2.0
DEFAULT_EXPANSION = 5
MODES = ("bm25", "ulm", "slm")


class EmptyDocumentWarning(UserWarning):
    pass


class ShortExpansionWarning(UserWarning):
    """Fewer candidate words than the requested expansion length."""


@dataclass
class Document:
    id: str
    tokens: list
    grade: int = None
    satisfaction: float = None

    def __post_init__(self):
        if not self.id:
            raise DataError("document id must be non-empty")
        self.tokens = [t.lower() for t in self.tokens]


@dataclass
class QuerySession:
    query: list
    examined: list
    unseen: list
    id: str = ""

    def __post_init__(self):
        self.query = [t.lower() for t in self.query]
        seen = {d.id for d in self.examined}
        clash = seen & {d.id for d in self.unseen}
        if clash:
            raise DataError(f"session {self.id!r}: documents both examined and unseen: {sorted(clash)}")

    @property
    def cut(self):
        return len(self.examined)

    def satisfaction(self):
        return [d.satisfaction for d in self.examined]

    def corpus(self):
        return CorpusStats([d.tokens for d in self.examined + self.unseen])


def satisfaction_prior(yhat, lam=DEFAULT_LAMBDA):
    """P(d) = (lam + yhat(d)) / (lam |D| + sum yhat).

    ``lam = inf`` and all-equal estimates both give the uniform prior, returned
    exactly rather than up to rounding.
    """
    y = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or len(y) == 0:
        raise DataError("need at least one examined document")
    if np.any(~np.isfinite(y)) or np.any((y < 0) | (y > 1)):
        raise DataError("satisfaction estimates must lie in [0, 1]")
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    if math.isinf(lam) or np.all(y == y[0]):
        return uniform_prior(len(y))
    return (lam + y) / (lam * len(y) + y.sum())


def uniform_prior(n):
    if n < 1:
        raise DataError("need at least one examined document")
    return np.full(n, 1.0 / n)


def word_relevance(examined, query, prior, stats, mu=SMOOTHING_MU):
    """R(w) = sum_d P(d) P(w|d) prod_i P(q_i|d) for every word of the examined documents.

    P(.|d) interpolates the document's maximum-likelihood model with the
    collection model ``stats``. Query terms the collection never contains
    would zero every product, so they are left out of it.
    """
    prior = np.asarray(prior, dtype=np.float64)
    if len(examined) == 0:
        raise DataError("word relevance needs at least one examined document")
    if len(prior) != len(examined):
        raise DataError("prior and examined documents differ in length")
    vocab = sorted({w for d in examined for w in d.tokens})
    q_terms = [q for q in query if stats.p_collection(q) > 0]
    scores = dict.fromkeys(vocab, 0.0)
    for d, p_d in zip(examined, prior):
        if not d.tokens:
            warnings.warn(f"skipping empty document {d.id!r}", EmptyDocumentWarning, stacklevel=2)
            continue
        tf = Counter(d.tokens)
        n = len(d.tokens)

        def p_w(w):
            return (1.0 - mu) * tf.get(w, 0) / n + mu * stats.p_collection(w)

        weight = p_d * math.prod(p_w(q) for q in q_terms)
        for w in vocab:
            scores[w] += weight * p_w(w)
    return scores


def rewrite_query(query, scores, l=DEFAULT_EXPANSION):
    """Append the ``l`` highest-scoring words not already in the query.

    Ties go to the lexicographically smaller word.
    """
    if l < 0:
        raise ConfigError("expansion length must be non-negative")
    present = set(query)
    ranked = sorted((w for w in scores if w not in present), key=lambda w: (-scores[w], w))
    if len(ranked) < l:
        warnings.warn(f"only {len(ranked)} expansion candidates for l={l}", ShortExpansionWarning,
                      stacklevel=2)
    return list(query) + ranked[:l]


def expanded_query(session, mode, lam=DEFAULT_LAMBDA, l=DEFAULT_EXPANSION, stats=None):
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; choose from {MODES}")
    if mode == "bm25" or not session.examined:
        return list(session.query)
    stats = stats if stats is not None else session.corpus()
    if mode == "ulm":
        prior = uniform_prior(len(session.examined))
    else:
        prior = satisfaction_prior(session.satisfaction(), lam)
    return rewrite_query(session.query, word_relevance(session.examined, session.query, prior, stats), l)


def rerank_session(session, mode="slm", lam=DEFAULT_LAMBDA, l=DEFAULT_EXPANSION):
    """Unseen documents ordered by BM25 of the (possibly rewritten) query."""
    if not session.unseen:
        return []
    stats = session.corpus()
    query = expanded_query(session, mode, lam, l, stats)
    scored = [(-bm25_score(query, d.tokens, stats), d.id, d) for d in session.unseen]
    scored.sort(key=lambda s: (s[0], s[1]))
    return [d for _, _, d in scored]


@dataclass
class SessionMetrics:
    session: str
    ndcg1: float
    ndcg5: float
    ndcg10: float
    map10: float


METRIC_NAMES = ("ndcg1", "ndcg5", "ndcg10", "map10")


def score_ranking(ranked):
    grades = [d.grade if d.grade is not None else 0 for d in ranked]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ap = map_at_k(grades, 10)
    return ndcg_at_k(grades, 1), ndcg_at_k(grades, 5), ndcg_at_k(grades, 10), ap


@dataclass
class SessionEvaluation:
    mode: str
    rows: list

    def mean(self):
        if not self.rows:
            return dict.fromkeys(METRIC_NAMES, 0.0)
        return {m: float(np.mean([getattr(r, m) for r in self.rows])) for m in METRIC_NAMES}

    def to_csv(self):
        lines = ["session," + ",".join(METRIC_NAMES)]
        for r in self.rows:
            lines.append(r.session + "," + ",".join(f"{getattr(r, m):.6f}" for m in METRIC_NAMES))
        mean = self.mean()
        lines.append("mean," + ",".join(f"{mean[m]:.6f}" for m in METRIC_NAMES))
        return "\n".join(lines) + "\n"


def evaluate_sessions(sessions, mode="slm", lam=DEFAULT_LAMBDA, l=DEFAULT_EXPANSION):
    """Mean NDCG@1/5/10 and MAP@10 of the re-ranked unseen lists."""
    rows = []
    for i, s in enumerate(sessions):
        ranked = rerank_session(s, mode, lam, l)
        rows.append(SessionMetrics(s.id or str(i), *score_ranking(ranked)))
    return SessionEvaluation(mode, rows)
