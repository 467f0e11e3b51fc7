"""User-item interactions, 8:1:1 splits, label mixing and a synthetic generator."""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from ..errors import ConfigError, DataError
from ..fileio import atomic_write_bytes
from ..seeding import STREAM_MIX, STREAM_SPLIT, STREAM_SYNTH, derive_rng

PROFILE_DIM = 71
LIKING_THRESHOLD = 5.0


def binarize_liking(liking, threshold=LIKING_THRESHOLD):
    """Ratings strictly above the threshold count as satisfied."""
    return (np.asarray(liking, dtype=np.float64) > threshold).astype(np.int64)


@dataclass
class InteractionSet:
    """Column-oriented interactions.

    ``labels`` are the true binary labels; ``estimates`` the estimated
    satisfaction in [0, 1] (NaN where unavailable).
    """
    users: np.ndarray
    items: np.ndarray
    labels: np.ndarray
    estimates: np.ndarray
    n_items: int

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.float64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.estimates = np.asarray(self.estimates, dtype=np.float64)
        n = len(self.items)
        if self.users.ndim != 2 or len(self.users) != n:
            raise DataError("user feature matrix must have one row per interaction")
        if len(self.labels) != n or len(self.estimates) != n:
            raise DataError("labels and estimates must have one entry per interaction")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise DataError("true labels must be 0 or 1")
        if n and (self.items.min() < 0 or self.items.max() >= self.n_items):
            raise DataError(f"item ids must lie in [0, {self.n_items})")
        est = self.estimates[~np.isnan(self.estimates)]
        if np.any((est < 0) | (est > 1)):
            raise DataError("estimated labels must lie in [0, 1]")
        if not np.all(np.isfinite(self.users)):
            raise DataError("user features must be finite")

    def __len__(self):
        return len(self.items)

    @property
    def n_features(self):
        return self.users.shape[1] + self.n_items

    def features(self, idx=None):
        """concat(user profile, one-hot item) for the selected rows."""
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        onehot = np.zeros((len(idx), self.n_items))
        onehot[np.arange(len(idx)), self.items[idx]] = 1.0
        return np.concatenate([self.users[idx], onehot], axis=1)


@dataclass
class SplitPlan:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    seed: int


def split_interactions(n, seed=0):
    """Random 8:1:1 split; valid and test get floor(n/10) each, train the rest."""
    if n < 10:
        raise DataError(f"need at least 10 interactions for an 8:1:1 split, got {n}")
    perm = derive_rng(seed, STREAM_SPLIT).permutation(n)
    k = n // 10
    return SplitPlan(np.sort(perm[2 * k:]), np.sort(perm[:k]), np.sort(perm[k:2 * k]), seed)


def mix_labels(labels, estimates, alpha, seed=0):
    """Keep true labels on a random floor(alpha * n) subset, estimates elsewhere.

    Returns ``(targets, is_true)``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    labels = np.asarray(labels, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    n = len(labels)
    n_true = math.floor(alpha * n + 1e-9)
    is_true = np.zeros(n, dtype=bool)
    is_true[derive_rng(seed, STREAM_MIX).permutation(n)[:n_true]] = True
    if np.any(np.isnan(estimates[~is_true])):
        raise DataError("estimated labels are missing for rows that need them")
    return np.where(is_true, labels, estimates), is_true


# ---------------------------------------------------------------------------
# files


def interactions_to_csv(data):
    d = data.users.shape[1]
    lines = [",".join([f"u{i}" for i in range(d)] + ["item", "label", "estimate"])]
    for u, item, y, e in zip(data.users, data.items, data.labels, data.estimates):
        lines.append(",".join([repr(float(v)) for v in u] + [str(int(item)), str(int(y)), repr(float(e))]))
    return "\n".join(lines) + "\n"


def save_interactions(data, path):
    atomic_write_bytes(path, interactions_to_csv(data).encode("utf-8"))


def load_interactions(path, n_items=None):
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if rows and rows[0].startswith("u0"):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no interactions")
    try:
        table = np.array([[float(v) for v in r.split(",")] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if table.ndim != 2 or table.shape[1] < 4:
        raise DataError(f"{path}: ragged or too few columns")
    items = table[:, -3].astype(np.int64)
    n_items = int(items.max()) + 1 if n_items is None else n_items
    return InteractionSet(table[:, :-3], items, table[:, -2].astype(np.int64), table[:, -1], n_items)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class RatingSynthConfig:
    users: int = 40
    items: int = 16
    profile_dim: int = PROFILE_DIM
    latent: int = 3
    item_effect: float = 1.0
    user_effect: float = 1.0
    noise: float = 0.5
    estimate_correlation: float = 0.8
    independent_estimates: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.users < 2 or self.items < 2 or self.profile_dim < 1 or self.latent < 1:
            raise ConfigError("users, items, profile_dim and latent must be positive (users, items >= 2)")
        if not 0.0 <= self.estimate_correlation < 1.0:
            raise ConfigError("estimate_correlation must lie in [0, 1)")

    def to_dict(self):
        return asdict(self)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _correlated_estimates(labels, noise, target):
    """sigmoid(kappa (2y - 1) + noise) with kappa solved so corr(estimate, y) = target."""
    y = labels.astype(np.float64)
    if target == 0.0 or y.std() == 0.0:
        return _sigmoid(noise)
    sign = 2.0 * y - 1.0

    def gap(kappa):
        return np.corrcoef(_sigmoid(kappa * sign + noise), y)[0, 1] - target

    return _sigmoid(brentq(gap, 0.0, 50.0, xtol=1e-12) * sign + noise)


def synth_interactions(config):
    """Every user rates every item on a 1-9 liking scale driven by a low-rank taste model."""
    cfg = config
    rng = derive_rng(cfg.seed, STREAM_SYNTH, "rating")
    profiles = rng.standard_normal((cfg.users, cfg.profile_dim))
    proj = rng.standard_normal((cfg.profile_dim, cfg.latent)) / math.sqrt(cfg.profile_dim)
    item_vec = rng.standard_normal((cfg.items, cfg.latent)) / math.sqrt(cfg.latent)
    item_bias = cfg.item_effect * rng.standard_normal(cfg.items)
    user_bias = cfg.user_effect * profiles @ rng.standard_normal(cfg.profile_dim) / math.sqrt(cfg.profile_dim)
    users = np.repeat(np.arange(cfg.users), cfg.items)
    items = np.tile(np.arange(cfg.items), cfg.users)
    taste = profiles @ proj
    score = item_bias[items] + user_bias[users] + np.sum(taste[users] * item_vec[items], axis=1)
    score += cfg.noise * rng.standard_normal(len(score))
    liking = np.clip(np.round(5.0 + 2.0 * score), 1, 9)
    labels = binarize_liking(liking)
    noise = rng.standard_normal(len(labels))
    target = 0.0 if cfg.independent_estimates else cfg.estimate_correlation
    estimates = _correlated_estimates(labels, noise, target)
    return InteractionSet(profiles[users], items, labels, estimates, cfg.items)
