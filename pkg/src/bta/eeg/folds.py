"""Cross-validation fold plans."""

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..seeding import STREAM_FOLDS, derive_rng


@dataclass
class FoldPlan:
    k: int
    assignment: np.ndarray  # sample index -> fold index

    def test_indices(self, fold):
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignment != fold)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def make_folds_grouped(samples, k=10, seed=0):
    """Shuffle distinct group ids, then deal them round-robin into ``k`` folds.

    ``samples`` is a dataset (anything with ``.groups``) or a sequence of
    group ids.
    """
    groups = np.asarray(getattr(samples, "groups", samples))
    unique = sorted(set(groups.tolist()))
    if len(unique) < k:
        raise DataError(f"{len(unique)} groups cannot fill {k} folds")
    order = derive_rng(seed, STREAM_FOLDS, 1).permutation(len(unique))
    fold_of = {unique[g]: i % k for i, g in enumerate(order)}
    assignment = np.array([fold_of[g] for g in groups.tolist()], dtype=np.int64)
    return FoldPlan(k, assignment)


def make_folds_random(samples, k=10, seed=0):
    """Random partition with fold sizes differing by at most one.

    ``samples`` is a dataset, any sized collection, or a sample count.
    """
    n_samples = samples if isinstance(samples, (int, np.integer)) else len(samples)
    if n_samples < k:
        raise DataError(f"{n_samples} samples cannot fill {k} folds")
    perm = derive_rng(seed, STREAM_FOLDS, 2).permutation(n_samples)
    assignment = np.empty(n_samples, dtype=np.int64)
    assignment[perm] = np.arange(n_samples) % k
    return FoldPlan(k, assignment)
