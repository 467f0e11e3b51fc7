from .data import (LIKING_THRESHOLD, PROFILE_DIM, InteractionSet, RatingSynthConfig, SplitPlan,
                   binarize_liking, interactions_to_csv, load_interactions, mix_labels,
                   save_interactions, split_interactions, synth_interactions)
from .models import (FM_FACTORS, FactorizationMachine, LogisticRegression, pairwise_naive,
                     soft_log_loss, train_model)
from .sweep import CONDITIONS, DEFAULT_ALPHAS, MODELS, SweepRow, fit_and_score, run_alpha_sweep, sweep_table

__all__ = [
    "CONDITIONS", "DEFAULT_ALPHAS", "FM_FACTORS", "FactorizationMachine", "InteractionSet",
    "LIKING_THRESHOLD", "LogisticRegression", "MODELS", "PROFILE_DIM", "RatingSynthConfig",
    "SplitPlan", "SweepRow", "binarize_liking", "fit_and_score", "interactions_to_csv",
    "load_interactions", "mix_labels", "pairwise_naive", "run_alpha_sweep", "save_interactions",
    "soft_log_loss", "split_interactions", "sweep_table", "synth_interactions", "train_model",
]
