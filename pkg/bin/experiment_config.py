#!/usr/bin/env python3
"""
Experiment Configuration Manager
Handles loading, validation and management of SSC experiment configuration.

Two file formats are accepted:

    # flat, one dotted key per line (documented format)
    channel.carrier_hz = 1e9
    experiment.snr_sweep_db = 0, 6, 12, 18

    # nested YAML, for files ending in .yaml / .yml
    channel:
      carrier_hz: 1.0e9
"""

import copy
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml

from ssc_channel import ChannelConfig
from ssc_errors import ConfigurationError
from ssc_model import ModelConfig
from ssc_training import TrainConfig

logger = logging.getLogger(__name__)

SCHEMES = ("deepssc", "no_ii", "integrated")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ExperimentConfig:
    """Manages experiment configuration with defaults, profiles and validation."""

    DEFAULT_CONFIG = {
        "paths": {
            "output_dir": "./runs/latest",
            "corpus_file": "",
            "vocab_file": "",
        },
        "corpus": {
            "source": "synthetic",
            "synthetic_sentences": 5500,
            "test_size": 500,
            "min_len": 4,
            "max_len": 30,
            "max_vocab": 50,
        },
        "model": {
            "d_model": 128,
            "symbol_dim": 16,
            "layers": 3,
            "heads": 8,
            "max_len": 30,
            "ff_dim": 512,
            "hidden_units": 256,
            "dropout": 0.1,
        },
        "channel": {
            "carrier_hz": 1e9,
            "bandwidth_hz": 2e7,
            "noise_figure_db": 10.0,
            "d_bob_m": 1000.0,
            "d_eve_m": 3000.0,
        },
        "training": {
            "learning_rate": 1e-4,
            "phase2_learning_rate": 0.0,
            "batch_size": 128,
            "epochs_stage_a": 20,
            "epochs_stage_b": 10,
            "epochs_phase2": 10,
            "epochs_integrated": 0,
            "snr_train_low_db": 0.0,
            "snr_train_high_db": 18.0,
            "w1": 1.0,
            "w2": 1.0,
            "eve_weight": 1.0,
            "clamp_ssc": False,
            "optimizer": "sgd",
            "grad_clip": 0.0,
            "max_steps": 0,
        },
        "experiment": {
            "seed": 0,
            "snr_sweep_db": [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0],
            "schemes": ["deepssc", "no_ii", "integrated"],
            "eval_fading_draws": 1000,
            "eval_block_size": 4,
            "eval_batch_size": 512,
            "capacity_draws": 100000,
        },
    }

    # Desk-scale profile: a full 3-scheme sweep fits on one CPU.
    TOY_OVERRIDES = {
        "model": {
            "d_model": 32,
            "symbol_dim": 8,
            "layers": 2,
            "heads": 4,
            "max_len": 14,
            "ff_dim": 64,
            "hidden_units": 64,
            "dropout": 0.0,
        },
        "corpus": {"max_len": 12},
        "training": {
            "batch_size": 64,
            "optimizer": "adam",
            "learning_rate": 1e-3,
            "epochs_stage_a": 16,
            "epochs_stage_b": 6,
            "epochs_phase2": 4,
            # Phase II may cost Bob at most 10% of his Phase I BLEU
            "phase2_learning_rate": 5e-4,
            "eve_weight": 0.5,
        },
    }

    PROFILES = {"default": {}, "toy": TOY_OVERRIDES}

    CONFIG_LOCATIONS = [
        "ssc_config.cfg",
        "config/ssc_config.cfg",
        os.path.expanduser("~/.ssc_config.cfg"),
    ]

    def __init__(
        self,
        config_path: Optional[str] = None,
        profile: str = "default",
        overrides: Optional[Sequence[str]] = None,
        search: bool = True,
    ):
        """Initialize configuration manager.

        Args:
            config_path: Optional explicit path to config file (must exist)
            profile: Named override set applied before the file ("default" or "toy")
            overrides: "section.key=value" strings applied last
            search: Look in CONFIG_LOCATIONS when no explicit path is given
        """
        if profile not in self.PROFILES:
            raise ConfigurationError(f"Unknown profile '{profile}' (expected one of {sorted(self.PROFILES)})")
        if config_path and not os.path.exists(config_path):
            raise ConfigurationError(f"Config file not found: {config_path}")

        self.profile = profile
        self.config_path = config_path
        self.config = self._deep_merge(copy.deepcopy(self.DEFAULT_CONFIG), copy.deepcopy(self.PROFILES[profile]))
        self._load_config(search)
        for override in overrides or []:
            self.apply_override(override)
        self._expand_paths()

    def _find_config_file(self, search: bool) -> Optional[str]:
        """Find configuration file in standard locations."""
        if self.config_path:
            return self.config_path
        if not search:
            return None

        for location in self.CONFIG_LOCATIONS:
            if os.path.exists(location):
                return location

        return None

    def _load_config(self, search: bool):
        config_file = self._find_config_file(search)
        if not config_file:
            logger.info("No config file found, using defaults")
            return

        try:
            with open(config_file, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigurationError(f"Cannot read config {config_file}: {e}") from e

        if config_file.endswith((".yaml", ".yml")):
            try:
                user_config = yaml.safe_load(text) or {}
            except yaml.YAMLError as e:
                raise ConfigurationError(f"Invalid YAML in {config_file}: {e}") from e
            if not isinstance(user_config, dict):
                raise ConfigurationError(f"{config_file} must contain a mapping of sections")
            for key, value in self._flatten(user_config).items():
                self.set(key, value)
        else:
            for key, value in self._parse_flat(text, config_file).items():
                self.set(key, value)

        self.config_path = config_file
        print(f"✓ Configuration loaded from: {config_file}")

    @staticmethod
    def _parse_flat(text: str, source: str) -> Dict[str, str]:
        entries = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{source}:{line_no}: expected 'section.key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
        return entries

    def _flatten(self, nested: Dict, prefix: str = "") -> Dict[str, Any]:
        flat = {}
        for key, value in nested.items():
            dotted = f"{prefix}{key}"
            if isinstance(value, dict):
                flat.update(self._flatten(value, dotted + "."))
            else:
                flat[dotted] = value
        return flat

    def _deep_merge(self, base: Dict, override: Dict) -> Dict:
        """Deep merge two dictionaries."""
        result = base.copy()
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = value
        return result

    def _expand_paths(self):
        """Expand ~ and environment variables in paths."""
        for key, value in self.config["paths"].items():
            if isinstance(value, str) and value:
                self.config["paths"][key] = os.path.expanduser(os.path.expandvars(value))

    @staticmethod
    def _coerce(key: str, value: Any, default: Any) -> Any:
        """Convert value to the type of the default."""
        try:
            if isinstance(default, bool):
                if isinstance(value, bool):
                    return value
                text = str(value).strip().lower()
                if text in _TRUE:
                    return True
                if text in _FALSE:
                    return False
                raise ValueError(f"not a boolean: {value!r}")
            if isinstance(default, int):
                number = float(value)
                if not number.is_integer():
                    raise ValueError(f"not an integer: {value!r}")
                return int(number)
            if isinstance(default, float):
                return float(value)
            if isinstance(default, list):
                items = [item.strip() for item in value.split(",") if item.strip()] if isinstance(value, str) else list(value)
                element = default[0] if default else ""
                return [ExperimentConfig._coerce(key, item, element) for item in items]
            return "" if value is None else str(value)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid value for {key}: {e}") from e

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dot-notation key.

        Args:
            key: Dot-notation key like 'channel.carrier_hz'
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        value = self.config
        for k in key.split("."):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any):
        """Set a known dot-notation key, coercing to the default's type."""
        parts = key.split(".")
        if len(parts) != 2 or parts[0] not in self.DEFAULT_CONFIG or parts[1] not in self.DEFAULT_CONFIG[parts[0]]:
            raise ConfigurationError(f"Unknown config key: {key}")
        section, name = parts
        self.config[section][name] = self._coerce(key, value, self.DEFAULT_CONFIG[section][name])

    def apply_override(self, assignment: str):
        """Apply one 'section.key=value' override (the CLI --set form)."""
        if "=" not in assignment:
            raise ConfigurationError(f"Override must look like section.key=value, got {assignment!r}")
        key, value = assignment.split("=", 1)
        self.set(key.strip(), value.strip())

    def save(self, path: Optional[str] = None):
        """Save current configuration as YAML.

        Args:
            path: Optional path to save to (defaults to config_used.yaml in the output dir)
        """
        save_path = path or os.path.join(self.get("paths.output_dir"), "config_used.yaml")
        Path(save_path).parent.mkdir(parents=True, exist_ok=True)
        with open(save_path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.config, f, default_flow_style=False, sort_keys=False)
        logger.info(f"Configuration saved to: {save_path}")
        return save_path

    # Typed views -----------------------------------------------------------

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **self.config["model"])

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(**self.config["channel"])

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        """Training settings; seed defaults to experiment.seed."""
        return TrainConfig(seed=self.get("experiment.seed") if seed is None else seed, **self.config["training"])

    @property
    def schemes(self) -> List[str]:
        return list(self.get("experiment.schemes"))

    @property
    def snr_sweep(self) -> List[float]:
        return list(self.get("experiment.snr_sweep_db"))

    # -----------------------------------------------------------------------

    def validate(self) -> tuple:
        """Validate configuration.

        Returns:
            Tuple of (is_valid, list of issues)
        """
        issues = []

        if not self.snr_sweep:
            issues.append("experiment.snr_sweep_db is empty")
        if not self.schemes:
            issues.append("experiment.schemes is empty")
        unknown = [scheme for scheme in self.schemes if scheme not in SCHEMES]
        if unknown:
            issues.append(f"Unknown schemes {unknown} (expected a subset of {list(SCHEMES)})")
        if len(set(self.schemes)) != len(self.schemes):
            issues.append("experiment.schemes lists a scheme twice")

        for key in ("eval_fading_draws", "eval_block_size", "eval_batch_size", "capacity_draws"):
            if self.get(f"experiment.{key}") < 1:
                issues.append(f"experiment.{key} must be >= 1")

        source = self.get("corpus.source")
        if source not in ("synthetic", "file"):
            issues.append(f"corpus.source must be 'synthetic' or 'file', got {source!r}")
        elif source == "file":
            corpus_file = self.get("paths.corpus_file")
            if not corpus_file:
                issues.append("corpus.source is 'file' but paths.corpus_file is empty")
            elif not os.path.exists(corpus_file):
                issues.append(f"Corpus file not found: {corpus_file}")
        if self.get("corpus.min_len") > self.get("corpus.max_len"):
            issues.append("corpus.min_len exceeds corpus.max_len")
        if self.get("corpus.max_vocab") < 5:
            issues.append(f"corpus.max_vocab must be at least 5, got {self.get('corpus.max_vocab')}")

        for name, build in (
            ("model", lambda: self.model_config(max(self.get("corpus.max_vocab"), 5))),
            ("channel", self.channel_config),
            ("training", self.train_config),
        ):
            try:
                build()
            except (ConfigurationError, TypeError) as e:
                issues.append(f"[{name}] {e}")

        return len(issues) == 0, issues

    def require_valid(self):
        is_valid, issues = self.validate()
        if not is_valid:
            raise ConfigurationError("Invalid configuration: " + "; ".join(issues))

    def print_summary(self):
        """Print configuration summary."""
        print("\n" + "=" * 60)
        print("SSC Experiment Configuration Summary")
        print("=" * 60)

        print(f"\n📚 Corpus:")
        if self.get("corpus.source") == "file":
            print(f"   File: {self.get('paths.corpus_file')}")
        else:
            print(f"   Synthetic grammar: {self.get('corpus.synthetic_sentences')} sentences")
        print(f"   Test split: {self.get('corpus.test_size')}, max vocab: {self.get('corpus.max_vocab')}")

        print(f"\n🧠 Model ({self.profile} profile):")
        print(
            f"   V={self.get('model.d_model')} N={self.get('model.symbol_dim')} L={self.get('model.max_len')} "
            f"layers={self.get('model.layers')} heads={self.get('model.heads')}"
        )

        print(f"\n📡 Channel:")
        print(f"   f_c={self.get('channel.carrier_hz'):.3g} Hz, B={self.get('channel.bandwidth_hz'):.3g} Hz")
        print(f"   d_B={self.get('channel.d_bob_m'):g} m, d_E={self.get('channel.d_eve_m'):g} m")

        print(f"\n🏋 Training:")
        print(
            f"   {self.get('training.optimizer')} η={self.get('training.learning_rate'):g} "
            f"B={self.get('training.batch_size')}"
        )
        print(
            f"   epochs A/B/II = {self.get('training.epochs_stage_a')}/"
            f"{self.get('training.epochs_stage_b')}/{self.get('training.epochs_phase2')}"
        )
        phase2_lr = self.get("training.phase2_learning_rate") or self.get("training.learning_rate")
        print(f"   Phase II η={phase2_lr:g}, Eve weight={self.get('training.eve_weight'):g}")

        print(f"\n📈 Sweep:")
        print(f"   Schemes: {', '.join(self.schemes)}")
        print(f"   SNR (dB): {', '.join(f'{snr:g}' for snr in self.snr_sweep)}")
        print(f"   Seed: {self.get('experiment.seed')}, output: {self.get('paths.output_dir')}")

        print("\n" + "=" * 60)

    def to_dict(self) -> Dict[str, Any]:
        """Return configuration as dictionary."""
        return copy.deepcopy(self.config)

    def to_json(self) -> str:
        """Return configuration as JSON string."""
        return json.dumps(self.config, indent=2)


if __name__ == "__main__":
    profile = sys.argv[1] if len(sys.argv) > 1 else "default"
    ExperimentConfig(profile=profile).print_summary()
