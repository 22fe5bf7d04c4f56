# coding=utf-8

"""
Shared pytest fixtures.

The ICBHI-like fixture in data/icbhi_fixture holds the annotation files, the
split listing and the hand-written manifest of six small recordings. The WAV
files are synthesized here, with the sample rates, bit depths and channel
counts of the different stethoscopes in the real database.
"""

import os
import shutil

import numpy as np
import pytest
import soundfile as sf

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), 'data',
        'icbhi_fixture')

# stem: (sample rate, subtype, channels, duration in seconds)
RECORDINGS = {
    '101_1b1_Al_sc_Meditron': (4000, 'PCM_16', 1, 6.0),
    '102_1b1_Ar_sc_Meditron': (44100, 'PCM_24', 1, 5.0),
    '103_2b2_Ar_mc_LittC2SE': (8000, 'PCM_16', 2, 4.0),
    '104_1b1_Ll_sc_Litt3200': (4000, 'PCM_32', 1, 8.0),
    '105_1b1_Tc_sc_Meditron': (10000, 'PCM_16', 1, 3.0),
    '106_2b1_Pl_mc_LittC2SE': (22050, 'PCM_24', 1, 6.0),
}

# Small networks and patches for the learning tests.
SMALL_SETTINGS = ['frontend.n_gammatone=16', 'frontend.patch_time=32',
                  'model.conv_channels=4,8,8,16', 'model.dense_units=16',
                  'model.decoder_channels=8,8,4,4,1', 'model.mlp_units=16',
                  'train.batch_size=4', 'train.lr=0.001']


def synthesize_recording(rate, channels, duration, seed):
    """Breath-like noise with a tone, scaled well inside [-1, 1)."""
    rng = np.random.default_rng(seed)
    n = int(round(rate * duration))
    t = np.arange(n) / float(rate)
    tone = 0.2 * np.sin(2 * np.pi * (150.0 + 50.0 * seed) * t)
    envelope = 0.5 + 0.5 * np.sin(2 * np.pi * 0.5 * t)
    mono = tone + 0.1 * envelope * rng.standard_normal(n)
    if channels == 1:
        return mono
    return np.stack([mono, 0.5 * mono], axis=1)


def build_fixture(target_dir):
    """Copies the annotations and split listing and writes the WAV files.

    Returns (dataset directory, split file path).
    """
    dataset = os.path.join(target_dir, 'ICBHI_final_database')
    os.makedirs(dataset)
    for seed, (stem, (rate, subtype, channels, duration)) in enumerate(
            sorted(RECORDINGS.items())):
        shutil.copy(os.path.join(FIXTURE_DIR, stem + '.txt'), dataset)
        sf.write(os.path.join(dataset, stem + '.wav'),
                synthesize_recording(rate, channels, duration, seed), rate,
                subtype=subtype, format='WAV')

    split_file = os.path.join(target_dir, 'split.txt')
    shutil.copy(os.path.join(FIXTURE_DIR, 'split.txt'), split_file)

    return dataset, split_file


@pytest.fixture
def icbhi_fixture(tmp_path):
    """(dataset dir, split file) of the six recording fixture."""
    return build_fixture(str(tmp_path))


@pytest.fixture
def expected_manifest_path():
    return os.path.join(FIXTURE_DIR, 'expected_manifest.csv')


@pytest.fixture
def rng():
    return np.random.default_rng(20170101)


@pytest.fixture
def icbhi_corpus():
    """The real database, when ICBHI_DIR and ICBHI_SPLIT are set."""
    dataset = os.environ.get('ICBHI_DIR')
    split_file = os.environ.get('ICBHI_SPLIT')
    if not dataset or not split_file:
        pytest.skip('ICBHI_DIR and ICBHI_SPLIT are not set')
    return dataset, split_file
