"""Synthetic EEG with a planted frontal-asymmetry class signal.

Satisfied trials carry an alpha-band oscillation on left-frontal channels,
unsatisfied trials carry it on right-frontal channels. Everything else is
spatially correlated 1/f noise, so the label is only recoverable from where
on the scalp the alpha power sits.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError
from ..seeding import STREAM_SYNTH, derive_rng
from .dataset import EegDataset
from .montage import Montage
from .signals import BAND_TABLES, Recording, window

CHANNEL_ORDER = ("F3", "F4", "Fz", "Cz", "C3", "C4", "Pz", "O1", "O2", "P3", "P4",
                 "Fp1", "Fp2", "F7", "F8", "T7", "T8", "AF3", "AF4", "P7", "P8",
                 "FC1", "FC2", "FC5", "FC6", "CP1", "CP2", "CP5", "CP6", "Oz", "PO3", "PO4")
LEFT_FRONTAL = ("F3", "F7", "Fp1", "AF3", "FC5")
RIGHT_FRONTAL = ("F4", "F8", "Fp2", "AF4", "FC6")


@dataclass
class SynthConfig:
    subjects: int = 10
    samples_per_class: int = 100  # per subject
    E: int = 8
    N: int = 128
    sample_rate: float = 128.0
    effect_size: float = 2.0
    seed: int = 0
    samples_per_group: int = 5
    bands: str = "search"

    def __post_init__(self):
        if self.E < 4:
            raise ConfigError("synthetic data needs E >= 4 so that F3 and F4 are present")
        if self.E > len(CHANNEL_ORDER):
            raise ConfigError(f"at most {len(CHANNEL_ORDER)} synthetic channels are supported")
        if self.subjects < 1 or self.samples_per_class < 1 or self.samples_per_group < 1:
            raise ConfigError("subjects, samples_per_class and samples_per_group must be positive")
        if self.N < 2 or self.sample_rate <= 0:
            raise ConfigError("N and sample_rate must be positive")
        if self.effect_size < 0:
            raise ConfigError("effect_size must be non-negative")
        if self.bands not in BAND_TABLES:
            raise ConfigError(f"unknown band table {self.bands!r}; choose from {sorted(BAND_TABLES)}")

    @property
    def channels(self):
        return list(CHANNEL_ORDER[: self.E])

    def to_dict(self):
        return asdict(self)


def _pink_noise(rng, shape, sample_rate):
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(shape[-1], d=1.0 / sample_rate)
    spec *= 1.0 / np.sqrt(np.maximum(freqs, 1.0))
    x = np.fft.irfft(spec, n=shape[-1], axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def synth_recordings(config):
    """One continuous recording per trial group; windows of a group share its label."""
    cfg = config
    channels = cfg.channels
    left = [i for i, c in enumerate(channels) if c in LEFT_FRONTAL]
    right = [i for i, c in enumerate(channels) if c in RIGHT_FRONTAL]
    groups_per_class = -(-cfg.samples_per_class // cfg.samples_per_group)
    recordings = []
    for subject in range(cfg.subjects):
        rng = derive_rng(cfg.seed, STREAM_SYNTH, subject)
        gain = rng.uniform(0.8, 1.2)
        for g in range(groups_per_class):
            n_windows = min(cfg.samples_per_group, cfg.samples_per_class - g * cfg.samples_per_group)
            T = n_windows * cfg.N
            for label in (0, 1):
                shared = _pink_noise(rng, (1, T), cfg.sample_rate)
                noise = _pink_noise(rng, (cfg.E, T), cfg.sample_rate) + 0.5 * shared
                noise /= noise.std(axis=-1, keepdims=True)
                freq = rng.uniform(8.5, 12.5)
                phases = rng.uniform(0.0, 2.0 * np.pi, size=cfg.E)
                t = np.arange(T) / cfg.sample_rate
                signal = noise
                for ch in (left if label == 1 else right):
                    signal[ch] += cfg.effect_size * np.sin(2.0 * np.pi * freq * t + phases[ch])
                recordings.append(Recording(channels, cfg.sample_rate, gain * signal,
                                            f"s{subject:02d}-g{g:03d}-{'sat' if label else 'uns'}", label))
    return recordings, Montage.standard(channels)


def synth_generate(config):
    """Returns ``(EegDataset, Montage)`` with balanced labels."""
    recordings, montage = synth_recordings(config)
    window_seconds = config.N / config.sample_rate
    samples = []
    for rec in recordings:
        samples.extend(window(rec, window_seconds))
    dataset = EegDataset.from_samples(samples, config.channels, config.sample_rate,
                                      BAND_TABLES[config.bands], name="synthetic")
    return dataset, montage
