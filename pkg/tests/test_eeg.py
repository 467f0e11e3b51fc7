import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bta.eeg import (AMIGOS_BANDS, SEARCH_BANDS, EegDataset, Montage, Recording, SynthConfig,
                     band_variance, de_features, load_dataset, load_recordings, make_folds_grouped,
                     make_folds_random, save_dataset, save_recordings, synth_generate, synth_recordings,
                     window, zscore_channels)
from bta.eeg.signals import ShortRecordingWarning
from bta.errors import ConfigError, DataError

FLOOR_DE = 0.5 * math.log(2 * math.pi * math.e * 1e-10)


def _recording(seconds, fs, E=2, group="g"):
    T = int(seconds * fs)
    sig = np.arange(E * T, dtype=float).reshape(E, T)
    return Recording([f"c{i}" for i in range(E)], fs, sig, group, label=1)


# -- windowing ----------------------------------------------------------------------


def test_window_sixteen_seconds():
    out = window(_recording(16, 128), 1.0)
    assert len(out) == 16
    assert all(s.temporal.shape == (2, 128) for s in out)
    assert all(s.label == 1 and s.group == "g" for s in out)


def test_window_whole_recording():
    assert len(window(_recording(3, 100), 3.0)) == 1


def test_window_overlap_matches_index_enumeration():
    rec = _recording(10, 100)
    out = window(rec, 2.0, overlap_seconds=1.0)
    starts = [s for s in range(0, 1000) if s + 200 <= 1000 and s % 100 == 0]
    assert len(out) == len(starts) == 9
    for sample, s in zip(out, starts):
        np.testing.assert_array_equal(sample.temporal, rec.signal[:, s:s + 200])


def test_window_short_recording_warns():
    with pytest.warns(ShortRecordingWarning):
        assert window(_recording(1, 100), 2.0) == []


@pytest.mark.parametrize("w,o", [(0, 0), (-1, 0), (1, 1), (1, 2), (1, -0.5)])
def test_window_rejects_bad_lengths(w, o):
    with pytest.raises(ConfigError):
        window(_recording(4, 100), w, o)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 5))
def test_window_concatenation_reproduces_prefix(seconds, w):
    rec = _recording(seconds, 10)
    out = window(rec, float(w)) if w <= seconds else []
    if out:
        joined = np.concatenate([s.temporal for s in out], axis=1)
        np.testing.assert_array_equal(joined, rec.signal[:, :joined.shape[1]])
        assert len(out) == seconds // w


# -- differential entropy -------------------------------------------------------------


def test_de_zero_signal_hits_floor():
    np.testing.assert_allclose(de_features(np.zeros((3, 128)), 128), FLOOR_DE)


def _bandpass_variance(x, fs, lo, hi):
    """Time-domain variance of an ideally band-passed signal."""
    spec = np.fft.fft(x)
    f = np.abs(np.fft.fftfreq(len(x), 1 / fs))
    spec[~((f >= lo) & (f < hi))] = 0
    return np.var(np.fft.ifft(spec).real)


def test_de_sine_ten_hertz():
    fs, t = 128, np.arange(128) / 128
    x = np.sin(2 * np.pi * 10 * t)[None]
    de = de_features(x, fs)[0]
    alpha = 2
    assert _bandpass_variance(x[0], fs, 8, 13) == pytest.approx(0.5, abs=1e-12)
    assert de[alpha] == pytest.approx(0.5 * math.log(math.pi * math.e), abs=1e-9)
    assert de[alpha] == pytest.approx(1.0724, abs=1e-4)
    others = np.delete(de, alpha)
    np.testing.assert_allclose(others, FLOOR_DE, atol=1e-9)


def test_band_variance_matches_bandpass_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 250))
    got = band_variance(x, 250.0, SEARCH_BANDS)
    for c in range(3):
        for b, (_, lo, hi) in enumerate(SEARCH_BANDS):
            assert got[c, b] == pytest.approx(_bandpass_variance(x[c], 250.0, lo, hi), rel=1e-9)


def test_de_band_tables():
    x = np.random.default_rng(1).normal(size=(4, 128))
    assert de_features(x, 128, SEARCH_BANDS).shape == (4, 5)
    assert de_features(x, 128, AMIGOS_BANDS).shape == (4, 4)


def test_de_band_above_nyquist():
    with pytest.raises(ConfigError):
        de_features(np.zeros((1, 64)), 64, (("gamma", 30.0, 45.0),))
    with pytest.raises(ConfigError):
        de_features(np.zeros((1, 64)), 64, (("bad", 8.0, 4.0),))


def test_de_doubling_amplitude_adds_ln2():
    x = np.random.default_rng(2).normal(size=(3, 128))
    np.testing.assert_allclose(de_features(2 * x, 128) - de_features(x, 128), math.log(2), atol=1e-9)


def test_de_channel_permutation():
    x = np.random.default_rng(3).normal(size=(5, 128))
    perm = [3, 0, 4, 1, 2]
    np.testing.assert_array_equal(de_features(x[perm], 128), de_features(x, 128)[perm])


def test_zscore_channels():
    z = zscore_channels(np.random.default_rng(4).normal(3, 5, size=(2, 3, 50)))
    np.testing.assert_allclose(z.mean(axis=-1), 0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=-1), 1, atol=1e-12)
    assert not zscore_channels(np.ones((1, 10))).any()


# -- folds ---------------------------------------------------------------------------


def test_grouped_one_group_per_fold():
    plan = make_folds_grouped([f"g{i}" for i in range(10)], k=10, seed=0)
    assert sorted(plan.assignment.tolist()) == list(range(10))


def test_grouped_twenty_three_groups():
    groups = [f"g{i}" for i in range(23) for _ in range(4)]
    plan = make_folds_grouped(groups, k=10, seed=5)
    per_fold = [len({g for g, f in zip(groups, plan.assignment) if f == k}) for k in range(10)]
    assert sorted(per_fold, reverse=True) == [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=12, max_size=80), st.integers(0, 1000))
def test_grouped_never_splits_a_group(groups, seed):
    k = min(4, len(set(groups)))
    if k < 2:
        return
    plan = make_folds_grouped(groups, k=k, seed=seed)
    for g in set(groups):
        assert len({f for gg, f in zip(groups, plan.assignment) if gg == g}) == 1


def test_grouped_too_few_groups():
    with pytest.raises(DataError):
        make_folds_grouped(["a", "b", "a"], k=3)


def test_random_folds_partition():
    plan = make_folds_random(100, k=10, seed=0)
    assert plan.sizes().tolist() == [10] * 10
    test_sets = [set(plan.test_indices(f).tolist()) for f in range(10)]
    assert set().union(*test_sets) == set(range(100))
    assert sum(len(s) for s in test_sets) == 100
    assert not set(plan.train_indices(0).tolist()) & test_sets[0]


def test_random_folds_replay():
    a = make_folds_random(57, k=10, seed=3).assignment
    b = make_folds_random(57, k=10, seed=3).assignment
    assert a.tobytes() == b.tobytes()
    assert np.ptp(make_folds_random(57, k=10, seed=3).sizes()) <= 1


# -- synthetic data and files ------------------------------------------------------------


SMALL = dict(subjects=2, samples_per_class=10, E=6, N=64, sample_rate=128.0)


def test_synth_deterministic_and_balanced():
    a, _ = synth_generate(SynthConfig(**SMALL, seed=4))
    b, _ = synth_generate(SynthConfig(**SMALL, seed=4))
    assert a.temporal.tobytes() == b.temporal.tobytes()
    assert a.spectral.tobytes() == b.spectral.tobytes()
    assert np.sum(a.labels == 1) == np.sum(a.labels == 0) == 20
    assert a.channels[:2] == ["F3", "F4"]


def test_synth_planted_alpha_asymmetry():
    ds, _ = synth_generate(SynthConfig(subjects=3, samples_per_class=30, seed=1))
    alpha = [name for name, _, _ in ds.bands].index("alpha")
    f3 = ds.spectral[:, ds.channels.index("F3"), alpha]
    f4 = ds.spectral[:, ds.channels.index("F4"), alpha]
    assert f3[ds.labels == 1].mean() - f3[ds.labels == 0].mean() > 0.5
    assert f4[ds.labels == 0].mean() - f4[ds.labels == 1].mean() > 0.5


def test_synth_requires_frontal_channels():
    with pytest.raises(ConfigError):
        SynthConfig(E=3)


def test_synth_groups_stay_within_class():
    ds, _ = synth_generate(SynthConfig(**SMALL))
    for g in set(ds.groups):
        assert len({int(y) for y, gg in zip(ds.labels, ds.groups) if gg == g}) == 1


def test_dataset_round_trip(tmp_path):
    ds, montage = synth_generate(SynthConfig(**SMALL))
    save_dataset(ds, tmp_path / "d", montage)
    back, m2 = load_dataset(tmp_path / "d")
    assert back.temporal.tobytes() == ds.temporal.tobytes()
    assert back.spectral.tobytes() == ds.spectral.tobytes()
    assert back.labels.tolist() == ds.labels.tolist() and back.groups == ds.groups
    assert back.bands == ds.bands and back.channels == ds.channels
    np.testing.assert_array_equal(m2.coordinates(ds.channels), montage.coordinates(ds.channels))


def test_recordings_round_trip(tmp_path):
    recs, _ = synth_recordings(SynthConfig(**SMALL))
    save_recordings(recs, tmp_path / "r")
    back = load_recordings(tmp_path / "r")
    assert len(back) == len(recs)
    assert back[0].signal.tobytes() == recs[0].signal.tobytes()
    assert back[-1].label == recs[-1].label and back[-1].group == recs[-1].group


def test_dataset_rejects_mismatched_arrays():
    with pytest.raises(DataError):
        EegDataset("x", ["a"], 64.0, SEARCH_BANDS, np.zeros((2, 1, 8)), np.zeros((2, 1, 5)), [0], ["g", "g"])


def test_montage_standard_and_file(tmp_path):
    m = Montage.standard(["F3", "F4", "Cz"])
    np.testing.assert_allclose(m.centralities[0], [0, 0, 1])
    assert np.all(np.linalg.norm(m.coordinates(["F3", "F4", "Cz"]), axis=1) <= 1.2)
    with pytest.raises(DataError):
        Montage.standard(["NotAChannel"])
    m.write(tmp_path / "m.txt")
    back = Montage.read(tmp_path / "m.txt")
    np.testing.assert_allclose(back.coordinates(["F3"]), m.coordinates(["F3"]))
