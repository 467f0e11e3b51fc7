"""Pretraining, transfer, cross-validated training and attention export."""

import itertools
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError, NumericError
from ..metrics import f1, safe_auc
from ..numerics import AdamState, adam_step
from ..seeding import STREAM_MASK, STREAM_SHUFFLE, derive_rng
from .network import HYPERPARAMETER_GRID, BtaNetwork, centrality_names

log = logging.getLogger(__name__)

PLATEAU_TOL = 1e-4


def minibatches(n, batch_size, rng):
    """Shuffled index batches; a trailing singleton is folded into the previous batch."""
    perm = rng.permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def run_epochs(step, n, batch_size, epochs, rng, patience=None, label="train"):
    """Drive ``step(indices) -> loss`` over shuffled minibatches.

    Stops early once the epoch loss has failed to improve by more than
    ``PLATEAU_TOL`` for ``patience`` consecutive epochs. Returns the per-epoch
    mean losses.
    """
    if n < 2:
        raise DataError(f"{label}: need at least 2 samples, got {n}")
    history = []
    best = math.inf
    stale = 0
    for epoch in range(epochs):
        total = 0.0
        for idx in minibatches(n, batch_size, rng):
            total += step(idx) * len(idx)
        loss = total / n
        if not math.isfinite(loss):
            raise NumericError(f"{label}: loss became {loss} in epoch {epoch}")
        history.append(loss)
        log.debug("%s epoch %d loss %.6f", label, epoch, loss)
        if patience is None:
            continue
        if loss < best - PLATEAU_TOL:
            best, stale = loss, 0
        else:
            stale += 1
            if stale >= patience:
                break
    return history


def fit_classifier(model, inputs, labels, lr, batch_size, epochs, patience, rng, label="train"):
    """Adam + cross-entropy on any model exposing ``store`` and ``loss_and_grads``."""
    labels = np.asarray(labels)
    if np.any((labels != 0) & (labels != 1)):
        raise DataError("training labels must be 0 or 1")
    state = AdamState(lr=lr)

    def step(idx):
        loss = model.loss_and_grads(*(a[idx] for a in inputs), labels[idx])
        adam_step(model.store, state)
        return loss

    return run_epochs(step, len(labels), batch_size, epochs, rng, patience, label)


# ---------------------------------------------------------------------------
# masked-reconstruction pretraining


def draw_mask(rng, shape, ratio):
    """1 keeps an entry visible, 0 hides it; P(hidden) = ratio."""
    return (rng.random(shape) >= ratio).astype(np.float64)


def pretrain_subtask(dataset, config, montage, initial=None):
    """Train a copy of the network on masked reconstruction.

    Only ``dataset.temporal`` and ``dataset.spectral`` are read; labels never
    enter. Returns ``(pretrained_network, loss_history)``.
    """
    xt, xs = dataset.temporal, dataset.spectral
    net = (initial.copy() if initial is not None
           else BtaNetwork.initialize(config, montage))
    net.fit_normalization(xs)
    state = AdamState(lr=config.lr)
    mask_rng = derive_rng(config.seed, STREAM_MASK)
    shuffle_rng = derive_rng(config.seed, STREAM_SHUFFLE, "pretrain")

    def step(idx):
        mt = draw_mask(mask_rng, xt[idx].shape, config.mask_ratio)
        ms = draw_mask(mask_rng, xs[idx].shape, config.mask_ratio)
        loss = net.reconstruction_loss_and_grads(xt[idx], xs[idx], mt, ms)
        adam_step(net.store, state)
        return loss

    history = run_epochs(step, len(xt), config.batch_size, config.pretrain_epochs, shuffle_rng,
                         patience=None, label="pretrain")
    return net, history


def transfer_centrality_embeddings(source, target, full_encoder=False):
    """Copy the 3M centrality embedding vectors of ``source`` into ``target``.

    With ``full_encoder`` the input projections, attention and batch-norm
    parameters are copied too. Everything else in ``target`` is left alone.
    Returns the list of copied parameter names.
    """
    sc, tc = source.config, target.config
    if sc.M != tc.M or sc.hidden != tc.hidden:
        raise ConfigError(f"cannot transfer M={sc.M}, H={sc.hidden} into M={tc.M}, H={tc.hidden}")
    names = centrality_names(tc.M)
    if full_encoder:
        names += [n for n in target.store.params if n.split(".")[0] in ("input", "attn", "bn")]
    for name in names:
        if source.store.params[name].shape != target.store.params[name].shape:
            raise ConfigError(f"shape mismatch for {name}")
        target.store.params[name][...] = source.store.params[name]
    return names


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldResult:
    fold: int
    auc: float
    f1: float
    train_loss: float
    epochs: int


@dataclass
class CvResult:
    folds: list
    best_fold: int
    best_store: object = None

    @property
    def mean_auc(self):
        return float(np.nanmean([f.auc for f in self.folds]))

    @property
    def mean_f1(self):
        return float(np.mean([f.f1 for f in self.folds]))

    @property
    def mean_train_loss(self):
        return float(np.mean([f.train_loss for f in self.folds]))

    def to_csv(self):
        lines = ["fold,auc,f1,train_loss"]
        for f in self.folds:
            lines.append(f"{f.fold},{f.auc:.6f},{f.f1:.6f},{f.train_loss:.6f}")
        lines.append(f"mean,{self.mean_auc:.6f},{self.mean_f1:.6f},{self.mean_train_loss:.6f}")
        return "\n".join(lines) + "\n"


def _check_fold(dataset, train_idx, test_idx, fold):
    if len(train_idx) == 0:
        raise DataError(f"fold {fold}: empty training set")
    if len(test_idx) == 0:
        raise DataError(f"fold {fold}: empty test set")
    if np.any(dataset.labels[train_idx] < 0):
        raise DataError(f"fold {fold}: training samples without labels")


def _evaluate_fold(fold, probs, labels, history):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        score_f1 = f1(probs, labels)
    return FoldResult(fold, safe_auc(probs, labels), score_f1, history[-1], len(history))


def _bta_fold(args):
    dataset, plan, config, montage, pretrained, fold = args
    train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
    _check_fold(dataset, train_idx, test_idx, fold)
    net = BtaNetwork.initialize(config, montage, "fold", fold)
    if pretrained is not None:
        transfer_centrality_embeddings(pretrained, net, config.transfer_full_encoder)
    xt, xs, y = dataset.temporal[train_idx], dataset.spectral[train_idx], dataset.labels[train_idx]
    net.fit_normalization(xs)
    rng = derive_rng(config.seed, STREAM_SHUFFLE, fold)
    history = fit_classifier(net, (xt, xs), y, config.lr, config.batch_size, config.epochs,
                             config.patience, rng, label=f"fold {fold}")
    probs = net.predict_proba(dataset.temporal[test_idx], dataset.spectral[test_idx])
    result = _evaluate_fold(fold, probs, dataset.labels[test_idx], history)
    log.info("fold %d: auc %.4f f1 %.4f (%d epochs)", fold, result.auc, result.f1, result.epochs)
    return result, net.store


def _run_folds(worker, args, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, args))
    return [worker(a) for a in args]


def _collect(outputs):
    folds = [r for r, _ in outputs]
    aucs = np.array([f.auc for f in folds])
    best = int(np.nanargmax(aucs)) if np.any(np.isfinite(aucs)) else 0
    return CvResult(folds, folds[best].fold, outputs[best][1])


def train_classifier(dataset, plan, config, montage, pretrained=None, jobs=1):
    """Train and evaluate one BTA per fold; returns a :class:`CvResult`.

    ``best_store`` holds the parameters of the fold with the highest AUC.
    """
    if len(plan.assignment) != len(dataset):
        raise DataError("fold plan does not cover the dataset")
    args = [(dataset, plan, config, montage, pretrained, fold) for fold in range(plan.k)]
    return _collect(_run_folds(_bta_fold, args, jobs))


def grid_search(dataset, plan, config, montage, grid=HYPERPARAMETER_GRID, pretrained=None, jobs=1):
    """Cross-validate every grid point; returns ``[(overrides, CvResult)]`` best first."""
    keys = sorted(grid)
    results = []
    for values in itertools.product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, values))
        if overrides.get("hidden", config.hidden) % config.heads:
            continue
        cv = train_classifier(dataset, plan, config.replace(**overrides), montage, pretrained, jobs)
        results.append((overrides, cv))
    results.sort(key=lambda r: -r[1].mean_auc)
    return results


# ---------------------------------------------------------------------------
# ablations


ABLATIONS = ("BTA", "w/o A", "w/o M", "w/o S")


def run_ablation(dataset, plan, config, montage, variants=ABLATIONS, jobs=1):
    """Run BTA and its ablated variants under one protocol.

    Returns ``{variant: CvResult}``. Pretraining is shared by the variants
    that use it.
    """
    unknown = set(variants) - set(ABLATIONS)
    if unknown:
        raise ConfigError(f"unknown ablation variants {sorted(unknown)}")
    pretrained = None
    if any(v in ("BTA", "w/o A") for v in variants):
        pretrained, _ = pretrain_subtask(dataset, config, montage)
    settings = {
        "BTA": (config, pretrained),
        "w/o A": (config.replace(use_attention=False), pretrained),
        "w/o M": (config.replace(use_centrality=False), None),
        "w/o S": (config, None),
    }
    out = {}
    for v in variants:
        cfg, pre = settings[v]
        out[v] = train_classifier(dataset, plan, cfg, montage, pre, jobs)
    return out


def ablation_table(results):
    lines = ["variant,mean_auc,mean_f1"]
    for name, cv in results.items():
        lines.append(f"{name},{cv.mean_auc:.6f},{cv.mean_f1:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# attention export


@dataclass
class AttentionMap:
    channels: list
    matrix: np.ndarray  # (E, E), rows = query channel

    def to_csv(self):
        lines = ["query," + ",".join(self.channels)]
        for name, row in zip(self.channels, self.matrix):
            lines.append(name + "," + ",".join(f"{v:.10f}" for v in row))
        return "\n".join(lines) + "\n"


def export_attention_map(dataset, network, class_filter="all", stream="spectral"):
    """Average head-averaged attention over the selected samples."""
    if class_filter == "all":
        idx = np.arange(len(dataset))
    elif class_filter in ("satisfied", "unsatisfied"):
        idx = np.flatnonzero(dataset.labels == (1 if class_filter == "satisfied" else 0))
    else:
        raise ConfigError(f"unknown class filter {class_filter!r}")
    if len(idx) == 0:
        raise DataError(f"no samples selected by filter {class_filter!r}")
    A = network.attention_maps(dataset.temporal[idx], dataset.spectral[idx], stream)
    return AttentionMap(list(dataset.channels), A.mean(axis=1).mean(axis=0))
