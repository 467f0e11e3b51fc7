from .baseline import MlpClassifier, baseline_mlp, flatten_features
from .checkpoint import load_checkpoint, save_checkpoint
from .geometry import centrality_encoding, channel_geometry, spherical_from_cartesian
from .network import HYPERPARAMETER_GRID, BtaConfig, BtaNetwork, centrality_names
from .training import (ABLATIONS, AttentionMap, CvResult, FoldResult, ablation_table, draw_mask,
                       export_attention_map, grid_search, pretrain_subtask, run_ablation,
                       train_classifier, transfer_centrality_embeddings)

__all__ = [
    "ABLATIONS", "AttentionMap", "BtaConfig", "BtaNetwork", "CvResult", "FoldResult",
    "HYPERPARAMETER_GRID", "MlpClassifier", "ablation_table", "baseline_mlp", "centrality_encoding",
    "centrality_names", "channel_geometry", "draw_mask", "export_attention_map", "flatten_features",
    "grid_search", "load_checkpoint", "pretrain_subtask", "run_ablation", "save_checkpoint",
    "spherical_from_cartesian", "train_classifier", "transfer_centrality_embeddings",
]
