"""
Unit tests for experiment_config.py
Tests defaults, both file formats, coercion, profiles, overrides and validation.
"""
import os
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'bin'))

from experiment_config import SCHEMES, ExperimentConfig
from ssc_channel import ChannelConfig
from ssc_errors import ConfigurationError
from ssc_model import ModelConfig
from ssc_training import TrainConfig


def _write(temp_dir, name, text):
    path = Path(temp_dir) / name
    path.write_text(text, encoding='utf-8')
    return str(path)


class TestDefaults:
    """Test the built-in defaults"""

    def test_default_values(self):
        """Test the reference setup"""
        config = ExperimentConfig(search=False)
        assert config.get('channel.carrier_hz') == 1e9
        assert config.get('channel.d_eve_m') == 3000.0
        assert config.get('model.symbol_dim') == 16
        assert config.snr_sweep == [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0]
        assert config.schemes == list(SCHEMES)

    def test_defaults_valid(self):
        """Test the defaults pass validation"""
        is_valid, issues = ExperimentConfig(search=False).validate()
        assert is_valid == True
        assert issues == []

    def test_get_missing_key(self):
        """Test unknown keys return the default"""
        config = ExperimentConfig(search=False)
        assert config.get('channel.nope', 'fallback') == 'fallback'

    def test_toy_profile(self):
        """Test the toy profile shrinks the model and keeps the channel"""
        config = ExperimentConfig(profile='toy', search=False)
        assert config.get('model.d_model') == 32
        assert config.get('training.optimizer') == 'adam'
        assert config.get('channel.d_bob_m') == 1000.0
        assert config.get('training.phase2_learning_rate') == 5e-4
        assert config.get('training.eve_weight') == 0.5
        assert config.validate()[0] == True

    def test_toy_file_matches_profile(self):
        """Test config/toy.cfg alone reproduces the toy profile's model and training"""
        path = os.path.join(os.path.dirname(__file__), '..', 'config', 'toy.cfg')
        from_file = ExperimentConfig(path, search=False)
        from_profile = ExperimentConfig(profile='toy', search=False)

        for section in ('model', 'training'):
            assert from_file.to_dict()[section] == from_profile.to_dict()[section]
        assert from_file.validate()[0] == True

    def test_unknown_profile(self):
        """Test an unknown profile is rejected"""
        with pytest.raises(ConfigurationError):
            ExperimentConfig(profile='huge', search=False)


class TestLoading:
    """Test flat and YAML config files"""

    def test_flat_file(self, temp_dir):
        """Test dotted keys, comments and lists"""
        path = _write(temp_dir, 'run.cfg', (
            '# comment line\n'
            'channel.carrier_hz = 2e9   # trailing comment\n'
            'experiment.snr_sweep_db = 0, 9, 18\n'
            'experiment.schemes = deepssc, no_ii\n'
            'training.clamp_ssc = yes\n'
        ))
        config = ExperimentConfig(path)

        assert config.get('channel.carrier_hz') == 2e9
        assert config.snr_sweep == [0.0, 9.0, 18.0]
        assert config.schemes == ['deepssc', 'no_ii']
        assert config.get('training.clamp_ssc') is True
        assert config.config_path == path

    def test_yaml_file(self, temp_dir):
        """Test nested YAML sections"""
        path = _write(temp_dir, 'run.yaml', yaml.safe_dump({
            'channel': {'d_eve_m': 500.0},
            'experiment': {'snr_sweep_db': [6, 12], 'seed': 9},
        }))
        config = ExperimentConfig(path)

        assert config.get('channel.d_eve_m') == 500.0
        assert config.snr_sweep == [6.0, 12.0]
        assert config.get('experiment.seed') == 9

    def test_missing_explicit_path(self, temp_dir):
        """Test a named file that does not exist is an error"""
        with pytest.raises(ConfigurationError, match='not found'):
            ExperimentConfig(os.path.join(temp_dir, 'absent.cfg'))

    def test_malformed_line(self, temp_dir):
        """Test a line without '=' is rejected with its position"""
        path = _write(temp_dir, 'bad.cfg', 'channel.carrier_hz 1e9\n')
        with pytest.raises(ConfigurationError, match='bad.cfg:1'):
            ExperimentConfig(path)

    def test_unknown_key(self, temp_dir):
        """Test misspelled keys are not silently ignored"""
        path = _write(temp_dir, 'typo.cfg', 'channel.carier_hz = 1e9\n')
        with pytest.raises(ConfigurationError, match='Unknown config key'):
            ExperimentConfig(path)

    def test_invalid_yaml(self, temp_dir):
        """Test unparsable YAML is a configuration error"""
        path = _write(temp_dir, 'broken.yaml', 'channel: [unclosed\n')
        with pytest.raises(ConfigurationError):
            ExperimentConfig(path)

    def test_search_disabled(self, temp_dir, monkeypatch):
        """Test search=False ignores a config file in the working directory"""
        monkeypatch.chdir(temp_dir)
        _write(temp_dir, 'ssc_config.cfg', 'experiment.seed = 42\n')

        assert ExperimentConfig(search=False).get('experiment.seed') == 0
        assert ExperimentConfig().get('experiment.seed') == 42


class TestCoercion:
    """Test value coercion through set() and overrides"""

    def test_int_from_float_text(self):
        """Test '1e3' becomes the integer 1000"""
        config = ExperimentConfig(search=False)
        config.set('experiment.capacity_draws', '1e3')
        assert config.get('experiment.capacity_draws') == 1000

    def test_non_integer_rejected(self):
        """Test fractional values for integer keys are rejected"""
        config = ExperimentConfig(search=False)
        with pytest.raises(ConfigurationError):
            config.set('training.batch_size', '12.5')

    def test_bad_boolean(self):
        """Test booleans accept only the usual spellings"""
        config = ExperimentConfig(search=False)
        with pytest.raises(ConfigurationError):
            config.set('training.clamp_ssc', 'maybe')

    def test_bad_number(self):
        """Test non-numeric text for a float key"""
        config = ExperimentConfig(search=False)
        with pytest.raises(ConfigurationError):
            config.set('channel.d_bob_m', 'far')

    def test_overrides_applied_last(self, tiny_config_file):
        """Test --set style overrides beat the file"""
        config = ExperimentConfig(tiny_config_file, overrides=['experiment.seed=11', 'model.dropout = 0.2'])
        assert config.get('experiment.seed') == 11
        assert config.get('model.dropout') == 0.2

    def test_override_without_equals(self):
        """Test an override must contain '='"""
        with pytest.raises(ConfigurationError):
            ExperimentConfig(search=False, overrides=['experiment.seed'])


class TestValidation:
    """Test validate()"""

    @pytest.mark.parametrize('override,fragment', [
        ('experiment.schemes=deepssc, magic', 'Unknown schemes'),
        ('experiment.schemes=no_ii, no_ii', 'twice'),
        ('experiment.eval_block_size=0', 'eval_block_size'),
        ('corpus.source=web', 'corpus.source'),
        ('corpus.source=file', 'corpus_file'),
        ('corpus.min_len=40', 'min_len'),
        ('corpus.max_vocab=4', 'max_vocab'),
        ('model.heads=5', '[model]'),
        ('channel.d_eve_m=0', '[channel]'),
        ('training.optimizer=rmsprop', '[training]'),
    ])
    def test_issues(self, override, fragment):
        """Test each inconsistency is reported"""
        config = ExperimentConfig(search=False, overrides=[override])
        is_valid, issues = config.validate()

        assert is_valid == False
        assert any(fragment in issue for issue in issues)

    def test_require_valid(self):
        """Test require_valid raises with the issues"""
        config = ExperimentConfig(search=False, overrides=['experiment.snr_sweep_db='])
        with pytest.raises(ConfigurationError, match='snr_sweep_db is empty'):
            config.require_valid()

    def test_missing_corpus_file(self, temp_dir):
        """Test a file corpus must exist"""
        config = ExperimentConfig(search=False, overrides=[
            'corpus.source=file', f'paths.corpus_file={os.path.join(temp_dir, "none.txt")}',
        ])
        assert any('Corpus file not found' in issue for issue in config.validate()[1])


class TestTypedViews:
    """Test the typed configuration views"""

    def test_views(self, tiny_experiment_config):
        """Test model, channel and training views carry the file values"""
        model = tiny_experiment_config.model_config(vocab_size=30)
        channel = tiny_experiment_config.channel_config()
        training = tiny_experiment_config.train_config()

        assert isinstance(model, ModelConfig) and model.vocab_size == 30 and model.d_model == 16
        assert isinstance(channel, ChannelConfig) and channel.d_eve_m == 3000.0
        assert isinstance(training, TrainConfig) and training.optimizer == 'adam'
        assert training.seed == 3

    def test_train_seed_override(self, tiny_experiment_config):
        """Test an explicit training seed wins"""
        assert tiny_experiment_config.train_config(seed=77).seed == 77


class TestPersistence:
    """Test save() and the dict/JSON views"""

    def test_save_round_trip(self, tiny_experiment_config, temp_dir):
        """Test the saved YAML reloads to the same configuration"""
        path = tiny_experiment_config.save(os.path.join(temp_dir, 'saved', 'config_used.yaml'))
        reloaded = ExperimentConfig(path)
        assert reloaded.to_dict() == tiny_experiment_config.to_dict()

    def test_save_default_location(self, tiny_experiment_config):
        """Test save() defaults to the output directory"""
        path = tiny_experiment_config.save()
        assert path == os.path.join(tiny_experiment_config.get('paths.output_dir'), 'config_used.yaml')
        assert os.path.exists(path)

    def test_to_dict_is_copy(self, tiny_experiment_config):
        """Test to_dict does not expose internal state"""
        data = tiny_experiment_config.to_dict()
        data['channel']['d_bob_m'] = 1.0
        assert tiny_experiment_config.get('channel.d_bob_m') == 1000.0

    def test_json(self, tiny_experiment_config):
        """Test JSON output contains every section"""
        text = tiny_experiment_config.to_json()
        for section in ('paths', 'corpus', 'model', 'channel', 'training', 'experiment'):
            assert f'"{section}"' in text

    def test_print_summary(self, tiny_experiment_config, capsys):
        """Test the summary lists the sweep"""
        tiny_experiment_config.print_summary()
        output = capsys.readouterr().out
        assert 'SSC Experiment Configuration Summary' in output
        assert 'deepssc, no_ii, integrated' in output
