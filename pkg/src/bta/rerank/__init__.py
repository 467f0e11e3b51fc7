from .sessions import SessionSynthConfig, load_sessions, save_sessions, sessions_to_json, synth_sessions
from .slm import (DEFAULT_EXPANSION, DEFAULT_LAMBDA, MODES, SMOOTHING_MU, Document, QuerySession,
                  SessionEvaluation, ShortExpansionWarning, evaluate_sessions, expanded_query,
                  rerank_session, rewrite_query, satisfaction_prior, uniform_prior, word_relevance)
from .text import BM25_B, BM25_K1, STOPWORDS, CorpusStats, bm25_score, tokenize

__all__ = [
    "BM25_B", "BM25_K1", "CorpusStats", "DEFAULT_EXPANSION", "DEFAULT_LAMBDA", "Document", "MODES",
    "QuerySession", "SMOOTHING_MU", "STOPWORDS", "SessionEvaluation", "SessionSynthConfig",
    "ShortExpansionWarning", "bm25_score", "evaluate_sessions", "expanded_query", "load_sessions",
    "rerank_session", "rewrite_query", "satisfaction_prior", "save_sessions", "sessions_to_json",
    "synth_sessions", "tokenize", "uniform_prior", "word_relevance",
]
