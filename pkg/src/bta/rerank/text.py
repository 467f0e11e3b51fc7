"""Tokenization, collection statistics and BM25."""

import math
import re
from collections import Counter

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN = re.compile(r"[^\W_]+")

# Only used when explicitly requested; default tokenization keeps every word.
STOPWORDS = frozenset("""
a an and are as at be but by for from has have he her his i if in into is it its me my no not of
on or our she so that the their them then there these they this to was we were what which who
will with you your
""".split())


def tokenize(text, stopwords=None):
    """Lowercase and split on every non-alphanumeric codepoint."""
    tokens = _TOKEN.findall(text.lower())
    if stopwords:
        tokens = [t for t in tokens if t not in stopwords]
    return tokens


class CorpusStats:
    """Document frequencies and the collection language model of a document set."""

    def __init__(self, documents):
        self.n_docs = 0
        self.df = Counter()
        self.cf = Counter()
        total = 0
        for tokens in documents:
            self.n_docs += 1
            self.df.update(set(tokens))
            self.cf.update(tokens)
            total += len(tokens)
        self.total_tokens = total
        self.avgdl = total / self.n_docs if self.n_docs else 0.0

    def p_collection(self, word):
        if self.total_tokens == 0:
            return 0.0
        return self.cf.get(word, 0) / self.total_tokens

    def idf(self, word):
        df = self.df.get(word, 0)
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(query, doc_tokens, stats, k1=BM25_K1, b=BM25_B, tf=None):
    """Okapi BM25 of one document; repeated query terms count once per occurrence."""
    if not query or not doc_tokens:
        return 0.0
    tf = tf if tf is not None else Counter(doc_tokens)
    norm = k1 * (1.0 - b + b * len(doc_tokens) / stats.avgdl) if stats.avgdl > 0 else k1
    score = 0.0
    for q in query:
        f = tf.get(q, 0)
        if f:
            score += stats.idf(q) * f * (k1 + 1.0) / (f + norm)
    return score
