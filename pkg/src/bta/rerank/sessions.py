"""Session files and a synthetic generator with planted topical satisfaction."""

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..fileio import atomic_write_bytes
from ..seeding import STREAM_SESSIONS, derive_rng
from .slm import Document, QuerySession
from .text import tokenize

SESSIONS_FORMAT = "bta-sessions"
SESSIONS_VERSION = 1


def sessions_to_json(sessions):
    out = []
    for s in sessions:
        out.append({
            "id": s.id,
            "query": " ".join(s.query),
            "examined": [{"id": d.id, "text": " ".join(d.tokens), "satisfaction": d.satisfaction}
                         for d in s.examined],
            "unseen": [{"id": d.id, "text": " ".join(d.tokens), "grade": d.grade} for d in s.unseen],
        })
    doc = {"format": SESSIONS_FORMAT, "version": SESSIONS_VERSION, "sessions": out}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_sessions(sessions, path):
    atomic_write_bytes(path, sessions_to_json(sessions).encode("utf-8"))


def _parse_session(raw, i):
    try:
        examined = [Document(str(d["id"]), tokenize(d["text"]), satisfaction=float(d["satisfaction"]))
                    for d in raw["examined"]]
        unseen = [Document(str(d["id"]), tokenize(d["text"]), grade=int(d.get("grade") or 0))
                  for d in raw["unseen"]]
        return QuerySession(tokenize(raw["query"]), examined, unseen, str(raw.get("id", i)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"session {i}: malformed entry ({exc})") from exc


def load_sessions(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except ValueError as exc:
            raise DataError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("format") != SESSIONS_FORMAT:
        raise DataError(f"{path}: expected format {SESSIONS_FORMAT!r}")
    if doc.get("version") != SESSIONS_VERSION:
        raise DataError(f"{path}: unsupported version {doc.get('version')}")
    return [_parse_session(raw, i) for i, raw in enumerate(doc["sessions"])]


@dataclass
class SessionSynthConfig:
    """Knobs of the planted-topic generator.

    Every session has an ambiguous query shared by two topics. Documents on
    the intended topic are relevant and, when examined, receive high
    satisfaction estimates; documents on the other topic are not.
    """
    sessions: int = 200
    examined: int = 5
    unseen: int = 20
    seed: int = 0
    topic_words: int = 12
    background_words: int = 2000
    doc_length: int = 60
    topic_share: float = 0.3
    query_rate: float = 1.5
    intent_examined: float = 0.5
    intent_unseen: float = 0.3
    satisfaction_gap: float = 0.6
    satisfaction_noise: float = 0.1

    def __post_init__(self):
        if self.sessions < 0 or self.examined < 1 or self.unseen < 1:
            raise ConfigError("need sessions >= 0 and at least one examined and one unseen document")
        for name in ("topic_share", "intent_examined", "intent_unseen", "satisfaction_gap"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.topic_words < 1 or self.background_words < 1 or self.doc_length < 1:
            raise ConfigError("vocabulary sizes and doc_length must be positive")

    def to_dict(self):
        return asdict(self)


def _topic_dist(n):
    w = 1.0 / np.arange(1, n + 1)
    return w / w.sum()


def _document(rng, cfg, topic, query):
    n = max(5, int(rng.poisson(cfg.doc_length)))
    n_topic = rng.binomial(n, cfg.topic_share)
    words = list(rng.choice(topic, size=n_topic, p=_topic_dist(len(topic))))
    words += [f"b{i}" for i in rng.integers(0, cfg.background_words, size=n - n_topic)]
    for q in query:
        words += [q] * int(rng.poisson(cfg.query_rate))
    rng.shuffle(words)
    return words


def _satisfaction(rng, cfg, intent):
    centre = 0.5 + (0.5 if intent else -0.5) * cfg.satisfaction_gap
    return float(np.clip(centre + cfg.satisfaction_noise * rng.standard_normal(), 0.0, 1.0))


def synth_session(cfg, index):
    rng = derive_rng(cfg.seed, STREAM_SESSIONS, index)
    tag = f"q{index:04d}"
    query = [f"{tag}x{k}" for k in range(2)]
    topics = {side: [f"{tag}{side}{k}" for k in range(cfg.topic_words)] for side in ("i", "o")}
    examined = []
    for j in range(cfg.examined):
        intent = bool(rng.random() < cfg.intent_examined)
        tokens = _document(rng, cfg, topics["i" if intent else "o"], query)
        examined.append(Document(f"{tag}-e{j:02d}", tokens, satisfaction=_satisfaction(rng, cfg, intent)))
    unseen = []
    for j in range(cfg.unseen):
        intent = bool(rng.random() < cfg.intent_unseen)
        tokens = _document(rng, cfg, topics["i" if intent else "o"], query)
        grade = int(rng.integers(1, 3)) if intent else 0
        unseen.append(Document(f"{tag}-u{j:02d}", tokens, grade=grade))
    return QuerySession(query, examined, unseen, tag)


def synth_sessions(config):
    return [synth_session(config, i) for i in range(config.sessions)]
