import numpy as np
import pytest

from bta.eeg import SynthConfig, synth_generate
from bta.model import BtaConfig, BtaNetwork
from pipeline import run_pipeline


@pytest.fixture(scope="session")
def tiny():
    """40 short synthetic samples on 4 channels: (dataset, montage)."""
    return synth_generate(SynthConfig(subjects=2, samples_per_class=10, E=4, N=64, sample_rate=128.0))


@pytest.fixture
def tiny_config(tiny):
    ds, _ = tiny
    return BtaConfig.for_dataset(ds, hidden=8, heads=2, epochs=3, pretrain_epochs=2, batch_size=8)


@pytest.fixture
def tiny_net(tiny, tiny_config):
    ds, montage = tiny
    net = BtaNetwork.initialize(tiny_config, montage)
    net.fit_normalization(ds.spectral)
    return net


@pytest.fixture(scope="session")
def pipeline_runs(tmp_path_factory):
    """Two replays with one worker and one with two workers."""
    roots = [tmp_path_factory.mktemp(name) for name in ("replay_a", "replay_b", "replay_jobs")]
    codes = [run_pipeline(roots[0]), run_pipeline(roots[1]), run_pipeline(roots[2], ("--jobs", "2"))]
    return roots, codes
