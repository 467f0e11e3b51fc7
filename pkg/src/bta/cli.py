"""Command-line entry point: ``bta <command> [options]``.

Every command resolves one configuration (built-in defaults, then the JSON
file given by ``--config``, then command-line flags), writes it to
``resolved_config.json`` in the output directory and finishes by writing
``manifest.json`` with the config hash and checksums of every output.
"""

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import MISSING, fields

import numpy as np

from . import __version__
from .eeg import (BAND_TABLES, EegDataset, Montage, SynthConfig, de_features, load_dataset,
                  load_recordings, make_folds_grouped, make_folds_random, save_dataset,
                  save_recordings, synth_generate, synth_recordings, window)
from .errors import ConfigError, DataError, NumericError
from .fileio import atomic_write_bytes, atomic_write_text, dump_json
from .metrics import f1, safe_auc
from .model import (ABLATIONS, BtaConfig, BtaNetwork, ablation_table, baseline_mlp,
                    export_attention_map, grid_search, load_checkpoint, pretrain_subtask,
                    run_ablation, save_checkpoint, train_classifier)
from .rating import (CONDITIONS, DEFAULT_ALPHAS, MODELS, RatingSynthConfig, load_interactions,
                     run_alpha_sweep, save_interactions, sweep_table, synth_interactions)
from .rerank import MODES, SessionSynthConfig, load_sessions, rerank_session, save_sessions, synth_sessions
from .rerank.slm import SessionEvaluation, SessionMetrics, score_ranking

log = logging.getLogger("bta")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_MODEL_KEYS = ("hidden", "heads", "lr", "batch_size", "epochs", "patience", "pretrain_epochs",
               "mask_ratio", "use_attention", "use_centrality", "transfer_full_encoder", "centralities")


def _dataclass_defaults(cls, skip=("seed",)):
    out = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        if f.default is not MISSING:
            out[f.name] = f.default
        elif f.default_factory is not MISSING:
            out[f.name] = f.default_factory()
    return out


def default_config():
    model = {k: v for k, v in _dataclass_defaults(BtaConfig).items() if k in _MODEL_KEYS}
    model["centralities"] = [list(c) for c in model["centralities"]]
    return {
        "seed": 0,
        "jobs": 1,
        "synth": _dataclass_defaults(SynthConfig),
        "features": {"bands": "search", "window_seconds": 1.0, "overlap_seconds": 0.0},
        "model": model,
        "cv": {"folds": 10, "mode": "grouped", "baseline": True},
        "attn_map": {"class_filter": "all", "stream": "spectral"},
        "rerank": {"lambda": 2.0, "l": 5, "modes": list(MODES),
                   "synth": _dataclass_defaults(SessionSynthConfig)},
        "rate": {"alphas": list(DEFAULT_ALPHAS), "models": list(MODELS), "conditions": list(CONDITIONS),
                 "k": 8, "lr": 0.05, "epochs": 200, "synth": _dataclass_defaults(RatingSynthConfig)},
    }


def merge_config(base, override, path="config"):
    """Recursively overlay ``override``; keys absent from ``base`` are rejected."""
    if not isinstance(override, dict):
        raise ConfigError(f"{path} must be a JSON object")
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path}.{key}")
        if isinstance(base[key], dict):
            out[key] = merge_config(base[key], value, f"{path}.{key}")
        else:
            out[key] = value
    return out


def load_config(path):
    cfg = default_config()
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return merge_config(cfg, user)


def config_hash(cfg):
    return hashlib.sha256(dump_json(cfg)).hexdigest()


# ---------------------------------------------------------------------------
# run bookkeeping


class Run:
    def __init__(self, command, cfg, out_dir, inputs):
        self.command = command
        self.cfg = cfg
        self.out = out_dir
        self.inputs = inputs
        self.outputs = []
        self.started = time.time()
        os.makedirs(out_dir, exist_ok=True)
        self.write_bytes("resolved_config.json", dump_json({"command": command, "inputs": inputs, **cfg}))

    def path(self, name):
        return os.path.join(self.out, name)

    def record(self, name):
        self.outputs.append(name)
        return self.path(name)

    def write_bytes(self, name, data):
        atomic_write_bytes(self.record(name), data)

    def write_text(self, name, text):
        atomic_write_text(self.record(name), text)

    def finish(self):
        files = []
        for name in sorted(set(self.outputs)):
            p = self.path(name)
            paths = [os.path.join(p, f) for f in sorted(os.listdir(p))] if os.path.isdir(p) else [p]
            for q in paths:
                with open(q, "rb") as fh:
                    digest = hashlib.sha256(fh.read()).hexdigest()
                files.append({"path": os.path.relpath(q, self.out), "sha256": digest})
        manifest = {
            "command": self.command,
            "version": __version__,
            "numpy": np.__version__,
            "config_sha256": config_hash(self.cfg),
            "seed": self.cfg["seed"],
            "wall_clock_seconds": round(time.time() - self.started, 3),
            "outputs": files,
        }
        atomic_write_bytes(self.path("manifest.json"), dump_json(manifest))


def _need(value, flag):
    if value is None:
        raise ConfigError(f"this command needs {flag}")
    return value


def _bands(spec):
    if isinstance(spec, str):
        if spec not in BAND_TABLES:
            raise ConfigError(f"unknown band table {spec!r}; choose from {sorted(BAND_TABLES)} or give a list")
        return BAND_TABLES[spec]
    try:
        return tuple((str(n), float(lo), float(hi)) for n, lo, hi in spec)
    except (TypeError, ValueError):
        raise ConfigError("bands must be a table name or a list of [name, lo, hi]") from None


def _model_config(cfg, dataset):
    return BtaConfig.for_dataset(dataset, seed=cfg["seed"], **cfg["model"])


def _load_data(path):
    dataset, montage = load_dataset(path)
    if montage is None:
        montage = Montage.standard(dataset.channels)
    return dataset, montage


def _fold_plan(cfg, dataset):
    cv = cfg["cv"]
    if cv["mode"] == "grouped":
        return make_folds_grouped(dataset, cv["folds"], cfg["seed"])
    if cv["mode"] == "random":
        return make_folds_random(dataset, cv["folds"], cfg["seed"])
    raise ConfigError(f"unknown fold mode {cv['mode']!r}; choose grouped or random")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(run, args):
    cfg = run.cfg
    synth = SynthConfig(seed=cfg["seed"], **cfg["synth"])
    recordings, montage = synth_recordings(synth)
    save_recordings(recordings, run.record("recordings"))
    dataset, montage = synth_generate(synth)
    save_dataset(dataset, run.record("dataset"), montage)
    log.info("wrote %d recordings and %d samples", len(recordings), len(dataset))


def cmd_features(run, args):
    cfg = run.cfg["features"]
    recordings = load_recordings(_need(args.data, "--data (a recordings directory)"))
    bands = _bands(cfg["bands"])
    samples = []
    for rec in recordings:
        for s in window(rec, cfg["window_seconds"], cfg["overlap_seconds"]):
            s.spectral = de_features(s.temporal, rec.sample_rate, bands)
            samples.append(s)
    if not samples:
        raise DataError("no complete windows in any recording")
    first = recordings[0]
    dataset = EegDataset.from_samples(samples, first.channels, first.sample_rate, bands,
                                      name=os.path.basename(os.path.normpath(args.data)))
    montage = Montage.read(args.montage) if args.montage else Montage.standard(first.channels)
    save_dataset(dataset, run.record("dataset"), montage)
    log.info("extracted %d windows with %d bands", len(dataset), dataset.B)


def cmd_pretrain(run, args):
    dataset, montage = _load_data(_need(args.data, "--data"))
    config = _model_config(run.cfg, dataset)
    net, history = pretrain_subtask(dataset, config, montage)
    save_checkpoint(net, run.record("pretrained.ckpt"))
    run.write_text("pretrain_loss.csv", "epoch,loss\n" + "".join(f"{i},{v:.10f}\n" for i, v in enumerate(history)))
    log.info("pretraining finished after %d epochs, loss %.6f", len(history), history[-1] if history else 0.0)


def _pretrained(path, config):
    if path is None:
        return None
    pre = load_checkpoint(path)
    if pre.config.M != config.M or pre.config.hidden != config.hidden:
        raise ConfigError(f"pretrained checkpoint has M={pre.config.M}, H={pre.config.hidden}; "
                          f"model wants M={config.M}, H={config.hidden}")
    return pre


def cmd_train(run, args):
    cfg = run.cfg
    dataset, montage = _load_data(_need(args.data, "--data"))
    config = _model_config(cfg, dataset)
    plan = _fold_plan(cfg, dataset)
    jobs = cfg["jobs"]
    if args.ablation:
        results = run_ablation_logged(dataset, plan, config, montage, jobs)
        run.write_text("ablation.csv", ablation_table(results))
        for name, cv in results.items():
            run.write_text(f"metrics_{name.replace('/', '').replace(' ', '_')}.csv", cv.to_csv())
        return
    pretrained = _pretrained(args.pretrained, config)
    if args.grid:
        results = grid_search(dataset, plan, config, montage, pretrained=pretrained, jobs=jobs)
        lines = ["lr,batch_size,hidden,mean_auc,mean_f1"]
        for o, cv in results:
            lines.append(f"{o['lr']},{o['batch_size']},{o['hidden']},{cv.mean_auc:.6f},{cv.mean_f1:.6f}")
        run.write_text("grid.csv", "\n".join(lines) + "\n")
        best_overrides, cv = results[0]
        config = config.replace(**best_overrides)
    else:
        cv = train_classifier(dataset, plan, config, montage, pretrained, jobs)
    run.write_text("metrics.csv", cv.to_csv())
    save_checkpoint(BtaNetwork(config, cv.best_store), run.record("model.ckpt"))
    log.info("BTA mean AUC %.4f, mean F1 %.4f", cv.mean_auc, cv.mean_f1)
    if cfg["cv"]["baseline"]:
        base = baseline_mlp(dataset, plan, config, jobs)
        run.write_text("baseline_metrics.csv", base.to_csv())
        log.info("MLP mean AUC %.4f, mean F1 %.4f", base.mean_auc, base.mean_f1)


def run_ablation_logged(dataset, plan, config, montage, jobs):
    results = run_ablation(dataset, plan, config, montage, ABLATIONS, jobs)
    full = results["BTA"].mean_auc
    for name, cv in results.items():
        if name != "BTA":
            direction = "below" if cv.mean_auc < full else "not below"
            log.info("%s: mean AUC %.4f (%s full BTA %.4f)", name, cv.mean_auc, direction, full)
    return results


def cmd_eval(run, args):
    dataset, _ = _load_data(_need(args.data, "--data"))
    net = load_checkpoint(_need(args.checkpoint, "--checkpoint"))
    probs = net.predict_proba(dataset.temporal, dataset.spectral)
    lines = ["index,group,label,probability"]
    for i, (g, y, p) in enumerate(zip(dataset.groups, dataset.labels, probs)):
        lines.append(f"{i},{g},{int(y)},{p:.10f}")
    run.write_text("predictions.csv", "\n".join(lines) + "\n")
    known = dataset.labels >= 0
    if np.any(known):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            score_f1 = f1(probs[known], dataset.labels[known])
        auc = safe_auc(probs[known], dataset.labels[known])
        run.write_text("eval_metrics.csv", f"auc,f1\n{auc:.6f},{score_f1:.6f}\n")
        log.info("AUC %.4f, F1 %.4f on %d labelled samples", auc, score_f1, int(known.sum()))


def cmd_attn_map(run, args):
    cfg = run.cfg["attn_map"]
    dataset, _ = _load_data(_need(args.data, "--data"))
    net = load_checkpoint(_need(args.checkpoint, "--checkpoint"))
    amap = export_attention_map(dataset, net, cfg["class_filter"], cfg["stream"])
    run.write_text("attention_map.csv", amap.to_csv())


def cmd_rerank(run, args):
    cfg = run.cfg["rerank"]
    if args.sessions:
        sessions = load_sessions(args.sessions)
    else:
        sessions = synth_sessions(SessionSynthConfig(seed=run.cfg["seed"], **cfg["synth"]))
        save_sessions(sessions, run.record("sessions.json"))
    modes = cfg["modes"]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigError(f"unknown rerank modes {bad}; choose from {MODES}")
    lines = ["mode,ndcg1,ndcg5,ndcg10,map10"]
    for mode in modes:
        rankings = [rerank_session(s, mode, cfg["lambda"], cfg["l"]) for s in sessions]
        ev = SessionEvaluation(mode, [SessionMetrics(s.id, *score_ranking(r)) for s, r in zip(sessions, rankings)])
        mean = ev.mean()
        lines.append(f"{mode},{mean['ndcg1']:.6f},{mean['ndcg5']:.6f},{mean['ndcg10']:.6f},{mean['map10']:.6f}")
        run.write_text(f"sessions_{mode}.csv", ev.to_csv())
        run.write_text(f"rankings_{mode}.txt",
                       "".join(s.id + "\t" + " ".join(d.id for d in r) + "\n" for s, r in zip(sessions, rankings)))
        log.info("%s: NDCG@5 %.4f", mode, mean["ndcg5"])
    run.write_text("rerank_metrics.csv", "\n".join(lines) + "\n")


def cmd_rate(run, args):
    cfg = run.cfg["rate"]
    if args.interactions:
        data = load_interactions(args.interactions)
    else:
        data = synth_interactions(RatingSynthConfig(seed=run.cfg["seed"], **cfg["synth"]))
        save_interactions(data, run.record("interactions.csv"))
    rows = run_alpha_sweep(data, [float(a) for a in cfg["alphas"]], cfg["models"], cfg["conditions"],
                           run.cfg["seed"], cfg["k"], cfg["lr"], cfg["epochs"])
    run.write_text("sweep.csv", sweep_table(rows))


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "attn-map": cmd_attn_map,
    "rerank": cmd_rerank,
    "rate": cmd_rate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; unknown keys are rejected")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--jobs", type=int, help="worker processes for cross-validation folds")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bta", description="EEG satisfaction estimation experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate synthetic recordings and features")
    p = sub.add_parser("features", parents=[common], help="window recordings and extract DE features")
    p.add_argument("--data", help="recordings directory")
    p.add_argument("--bands", help="band table name: search or amigos")
    p.add_argument("--window", type=float, help="window length in seconds")
    p.add_argument("--overlap", type=float, help="window overlap in seconds")
    p.add_argument("--montage", help="montage file with 'name x y z' lines")

    p = sub.add_parser("pretrain", parents=[common], help="masked-reconstruction pretraining")
    p.add_argument("--data", help="dataset directory")
    p = sub.add_parser("train", parents=[common], help="cross-validated classifier training")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--pretrained", help="pretraining checkpoint; only centrality embeddings transfer")
    p.add_argument("--ablation", action="store_true", help="run BTA and its ablated variants")
    p.add_argument("--grid", action="store_true", help="search the learning-rate/batch/hidden grid")
    p.add_argument("--folds", type=int, help="number of folds")
    p.add_argument("--fold-mode", choices=("grouped", "random"))
    p.add_argument("--no-baseline", action="store_true", help="skip the MLP reference")
    p = sub.add_parser("eval", parents=[common], help="score a dataset with a checkpoint")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--checkpoint", help="model checkpoint")
    p = sub.add_parser("attn-map", parents=[common], help="export averaged attention between channels")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--checkpoint", help="model checkpoint")
    p.add_argument("--class", dest="class_filter", choices=("all", "satisfied", "unsatisfied"))
    p.add_argument("--stream", choices=("spectral", "temporal"))

    p = sub.add_parser("rerank", parents=[common], help="re-rank search sessions")
    p.add_argument("--sessions", help="session file (synthetic sessions are generated when absent)")
    p.add_argument("--mode", choices=MODES + ("all",), help="ranking mode (default: all three)")
    p.add_argument("--lambda", dest="lam", type=float, help="satisfaction prior smoothing")
    p.add_argument("--l", dest="expansion", type=int, help="number of expansion words")
    p = sub.add_parser("rate", parents=[common], help="rating prediction sweep over the true-label ratio")
    p.add_argument("--interactions", help="interaction file (synthetic data is generated when absent)")
    p.add_argument("--alpha", type=float, nargs="+", help="true-label ratios to sweep")
    return parser


def apply_flags(cfg, args):
    """Flags win over the config file."""
    cfg = copy.deepcopy(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    overrides = {
        ("features", "bands"): getattr(args, "bands", None),
        ("features", "window_seconds"): getattr(args, "window", None),
        ("features", "overlap_seconds"): getattr(args, "overlap", None),
        ("cv", "folds"): getattr(args, "folds", None),
        ("cv", "mode"): getattr(args, "fold_mode", None),
        ("attn_map", "class_filter"): getattr(args, "class_filter", None),
        ("attn_map", "stream"): getattr(args, "stream", None),
        ("rerank", "lambda"): getattr(args, "lam", None),
        ("rerank", "l"): getattr(args, "expansion", None),
        ("rate", "alphas"): getattr(args, "alpha", None),
    }
    for (section, key), value in overrides.items():
        if value is not None:
            cfg[section][key] = value
    if getattr(args, "no_baseline", False):
        cfg["cv"]["baseline"] = False
    mode = getattr(args, "mode", None)
    if mode is not None:
        cfg["rerank"]["modes"] = list(MODES) if mode == "all" else [mode]
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise ConfigError("jobs must be a positive integer")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    return cfg


def _inputs(args):
    keys = ("data", "pretrained", "checkpoint", "sessions", "interactions", "montage")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = apply_flags(load_config(args.config), args)
        run = Run(args.command, cfg, args.out, _inputs(args))
        COMMANDS[args.command](run, args)
        run.finish()
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except TypeError as exc:
        # typically a config value of the wrong type reaching a constructor
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
