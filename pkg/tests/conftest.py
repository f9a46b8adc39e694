"""
Pytest configuration and fixtures for SSC Lab tests
"""
import os
import shutil
import sys
import tempfile
from pathlib import Path

import pytest
import torch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'bin'))

from ssc_corpus import Vocabulary, encode_dataset
from ssc_model import ModelConfig

TINY_WORDS = ['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h']

TINY_CONFIG_TEXT = """
# miniature end-to-end run
corpus.source = synthetic
corpus.synthetic_sentences = 96
corpus.test_size = 16
corpus.max_len = 6
corpus.max_vocab = 50

model.d_model = 16
model.symbol_dim = 4
model.layers = 1
model.heads = 2
model.max_len = 8
model.ff_dim = 32
model.hidden_units = 32
model.dropout = 0.0

training.batch_size = 16
training.optimizer = adam
training.learning_rate = 1e-3
training.epochs_stage_a = 1
training.epochs_stage_b = 1
training.epochs_phase2 = 1

experiment.seed = 3
experiment.snr_sweep_db = 0, 18
experiment.schemes = deepssc, no_ii, integrated
experiment.eval_fading_draws = 4
experiment.eval_block_size = 2
experiment.eval_batch_size = 4
experiment.capacity_draws = 2000
"""


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests"""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path)


@pytest.fixture
def tiny_vocab():
    """Eight ordinary words plus the four specials (size 12)"""
    return Vocabulary(TINY_WORDS)


@pytest.fixture
def tiny_model_config():
    """Miniature model: V=8, N=4, L=6, vocab=12, one layer, two heads"""
    return ModelConfig(
        vocab_size=12,
        d_model=8,
        symbol_dim=4,
        layers=1,
        heads=2,
        max_len=6,
        ff_dim=16,
        hidden_units=16,
        dropout=0.0,
    )


@pytest.fixture
def tiny_sentences():
    """Deterministic in-vocabulary sentences of 1-4 words"""
    generator = torch.Generator().manual_seed(11)
    sentences = []
    for _ in range(64):
        length = int(torch.randint(1, 5, (1,), generator=generator))
        picks = torch.randint(0, len(TINY_WORDS), (length,), generator=generator).tolist()
        sentences.append(' '.join(TINY_WORDS[i] for i in picks))
    return sentences


@pytest.fixture
def tiny_dataset(tiny_sentences, tiny_vocab):
    """64 encoded sentences at L=6"""
    return encode_dataset(tiny_sentences, tiny_vocab, 6)


@pytest.fixture
def worked_example_files(temp_dir):
    """Source/Bob/Eve files for the 'weather is good today' example"""
    paths = {}
    for name, line in [
        ('src', 'weather is good today'),
        ('bob', 'weather is nice today'),
        ('eve', 'weather good'),
    ]:
        path = Path(temp_dir) / f'{name}.txt'
        path.write_text(line + '\n', encoding='utf-8')
        paths[name] = str(path)
    return paths


@pytest.fixture
def toy_corpus_file(temp_dir):
    """Small raw corpus with punctuation, casing and a one-word line"""
    path = Path(temp_dir) / 'corpus.txt'
    path.write_text(
        'The cat sat.\n'
        'Hi\n'
        '\n'
        'A dog, quietly, watches the old farmer!\n'
        'Every bird sees the river today\n',
        encoding='utf-8',
    )
    return str(path)


@pytest.fixture
def tiny_config_file(temp_dir):
    """Flat config file for a miniature 3-scheme, 2-SNR run"""
    path = Path(temp_dir) / 'tiny.cfg'
    out_dir = Path(temp_dir) / 'run'
    path.write_text(TINY_CONFIG_TEXT + f'\npaths.output_dir = {out_dir}\n', encoding='utf-8')
    return str(path)


@pytest.fixture
def tiny_experiment_config(tiny_config_file):
    """ExperimentConfig loaded from tiny_config_file"""
    from experiment_config import ExperimentConfig

    return ExperimentConfig(tiny_config_file)
