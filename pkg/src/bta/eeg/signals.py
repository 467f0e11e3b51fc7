"""Recordings, windowing and differential-entropy band features."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError

DE_FLOOR = 1e-10

# (name, lo Hz, hi Hz); bins with lo <= f < hi belong to the band
SEARCH_BANDS = (("delta", 1.0, 4.0), ("theta", 4.0, 8.0), ("alpha", 8.0, 13.0),
                ("beta", 13.0, 30.0), ("gamma", 30.0, 45.0))
AMIGOS_BANDS = SEARCH_BANDS[1:]
BAND_TABLES = {"search": SEARCH_BANDS, "amigos": AMIGOS_BANDS}


class ShortRecordingWarning(UserWarning):
    pass


@dataclass
class Recording:
    channels: list
    sample_rate: float
    signal: np.ndarray  # (E, T)
    group: str
    label: int = -1  # -1 means unlabeled

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float64)
        if self.signal.ndim != 2 or self.signal.shape[0] != len(self.channels):
            raise DataError(f"signal shape {self.signal.shape} does not match {len(self.channels)} channels")
        if len(set(self.channels)) != len(self.channels):
            raise DataError("channel names must be unique")
        if self.label not in (-1, 0, 1):
            raise DataError(f"label must be 0, 1 or -1 (absent), got {self.label}")


@dataclass
class EegSample:
    temporal: np.ndarray  # (E, N)
    spectral: np.ndarray | None  # (E, B)
    label: int
    group: str


def window(recording, window_seconds, overlap_seconds=0.0):
    """Cut a recording into fixed-length windows; the trailing partial one is dropped."""
    if window_seconds <= 0:
        raise ConfigError("window length must be positive")
    if not 0 <= overlap_seconds < window_seconds:
        raise ConfigError("overlap must be in [0, window)")
    fs = recording.sample_rate
    n = int(round(window_seconds * fs))
    step = int(round((window_seconds - overlap_seconds) * fs))
    if not math.isclose(n, window_seconds * fs) or not math.isclose(step, (window_seconds - overlap_seconds) * fs):
        raise ConfigError("window and step must be a whole number of samples")
    T = recording.signal.shape[1]
    if T < n:
        warnings.warn(f"recording {recording.group!r} is shorter than one window", ShortRecordingWarning, stacklevel=2)
        return []
    return [
        EegSample(recording.signal[:, s:s + n].copy(), None, recording.label, recording.group)
        for s in range(0, T - n + 1, step)
    ]


def validate_bands(bands, sample_rate):
    nyquist = sample_rate / 2.0
    for name, lo, hi in bands:
        if not lo < hi:
            raise ConfigError(f"band {name!r}: low edge {lo} must be below high edge {hi}")
        if lo < 0 or hi > nyquist:
            raise ConfigError(f"band {name!r} [{lo}, {hi}) exceeds Nyquist {nyquist} Hz")


def band_variance(temporal, sample_rate, bands):
    """Variance carried by each band, per channel: (E, B).

    Uses the rectangular-window periodogram, so by Parseval the value equals
    the time-domain variance of the ideally band-passed signal.
    """
    x = np.atleast_2d(np.asarray(temporal, dtype=np.float64))
    n = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    power = (spec.real ** 2 + spec.imag ** 2) / (n * n)
    # one-sided spectrum: double every bin that has a negative-frequency twin
    weight = np.full(power.shape[-1], 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    power = power * weight
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    out = np.empty(x.shape[:-1] + (len(bands),))
    for b, (_, lo, hi) in enumerate(bands):
        sel = (freqs >= lo) & (freqs < hi)
        out[..., b] = power[..., sel].sum(axis=-1)
    return out


def de_features(temporal, sample_rate, bands=SEARCH_BANDS):
    """Differential entropy 0.5*ln(2*pi*e*var) per channel and band."""
    validate_bands(bands, sample_rate)
    var = band_variance(temporal, sample_rate, bands)
    return 0.5 * np.log(2.0 * np.pi * np.e * np.maximum(var, DE_FLOOR))


def zscore_channels(temporal, eps=1e-8):
    """Standardize each channel of each sample over time."""
    x = np.asarray(temporal, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    return (x - mean) / np.maximum(std, eps)
