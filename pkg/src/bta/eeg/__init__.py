from .dataset import EegDataset, load_dataset, load_matrix, load_recordings, save_dataset, save_recordings
from .folds import FoldPlan, make_folds_grouped, make_folds_random
from .montage import STANDARD_POSITIONS, Montage, default_centralities
from .signals import (AMIGOS_BANDS, BAND_TABLES, SEARCH_BANDS, EegSample, Recording, band_variance,
                      de_features, window, zscore_channels)
from .synth import SynthConfig, synth_generate, synth_recordings

__all__ = [
    "AMIGOS_BANDS", "BAND_TABLES", "EegDataset", "EegSample", "FoldPlan", "Montage", "Recording",
    "SEARCH_BANDS", "STANDARD_POSITIONS", "SynthConfig", "band_variance", "de_features",
    "default_centralities", "load_dataset", "load_matrix", "load_recordings", "make_folds_grouped",
    "make_folds_random", "save_dataset", "save_recordings", "synth_generate", "synth_recordings",
    "window", "zscore_channels",
]
