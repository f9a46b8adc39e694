#!/usr/bin/env python3
"""
SSC Experiment Orchestrator
Main entry point: Corpus → Phase I → Phase II / baselines → SNR sweep → Report
"""

import argparse
import copy
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import torch

# Add bin directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from checkpoint_inspector import CheckpointInspector  # noqa: E402
from experiment_config import SCHEMES, ExperimentConfig  # noqa: E402
from sweep_report import SweepResult, SweepRow, emit_outputs  # noqa: E402
from ssc_channel import ChannelRealization, WiretapChannel, ergodic_secrecy_capacity  # noqa: E402
from ssc_corpus import (  # noqa: E402
    TokenSequence,
    Vocabulary,
    build_vocab,
    decode_tokens,
    encode_dataset,
    generate_synthetic_corpus,
    load_corpus,
    split_corpus,
    stack_batch,
)
from ssc_errors import ConfigurationError, SSCError  # noqa: E402
from ssc_metrics import WEIGHTS_1GRAM, WEIGHTS_3GRAM, corpus_score, score_files  # noqa: E402
from ssc_model import (  # noqa: E402
    RECEIVER_DECODERS,
    ParameterBundle,
    decode_batch,
    encode_for_broadcast,
    init_params,
    receive,
    save_checkpoint,
)
from ssc_training import (  # noqa: E402
    LossLogger,
    LossRecord,
    derive_seed,
    sentence_cross_entropy,
    train_integrated,
    train_phase1,
    train_phase2,
)

logger = logging.getLogger(__name__)


@dataclass
class CorpusSplit:
    vocab: Vocabulary
    train_sentences: List[str]
    test_sentences: List[str]
    train_set: List[TokenSequence]
    test_set: List[TokenSequence]


class ExperimentOrchestrator:
    """Trains the DeepSSC scheme and its baselines and evaluates them over an SNR sweep."""

    def __init__(self, config: ExperimentConfig):
        """Initialize orchestrator.

        Args:
            config: Validated experiment configuration (ConfigurationError otherwise)
        """
        config.require_valid()
        self.config = config
        self.seed = int(config.get("experiment.seed"))
        self.out_dir = Path(config.get("paths.output_dir"))
        self.channel_config = config.channel_config()
        self.train_config = config.train_config(seed=derive_seed(self.seed, "train"))
        self._data: Optional[CorpusSplit] = None
        self._phase1: Optional[Tuple[ParameterBundle, List[LossRecord]]] = None
        self._loss_logger: Optional[LossLogger] = None

    @property
    def loss_logger(self) -> LossLogger:
        if self._loss_logger is None:
            path = self.out_dir / "losses.csv"
            if path.exists():
                path.unlink()
            self._loss_logger = LossLogger(str(path))
        return self._loss_logger

    # ---------------------------------------------------------------------
    # Data
    # ---------------------------------------------------------------------

    def prepare_data(self) -> CorpusSplit:
        """Load or generate the corpus, fix the train/test split and build the vocabulary."""
        if self._data is not None:
            return self._data

        cfg = self.config
        L = cfg.get("model.max_len")
        max_words = min(cfg.get("corpus.max_len"), L - 2)
        if cfg.get("corpus.source") == "file":
            sentences = load_corpus(cfg.get("paths.corpus_file"), cfg.get("corpus.min_len"), cfg.get("corpus.max_len"))
        else:
            sentences = generate_synthetic_corpus(
                cfg.get("corpus.synthetic_sentences"),
                seed=derive_seed(self.seed, "corpus"),
                min_len=cfg.get("corpus.min_len"),
                max_len=max_words,
            )

        train, test = split_corpus(sentences, cfg.get("corpus.test_size"), derive_seed(self.seed, "split"))
        if not test:
            raise ConfigurationError("corpus.test_size must leave at least one test sentence")

        vocab_file = cfg.get("paths.vocab_file")
        vocab = Vocabulary.load(vocab_file) if vocab_file else build_vocab(train, cfg.get("corpus.max_vocab"))

        self._data = CorpusSplit(
            vocab=vocab,
            train_sentences=train,
            test_sentences=test,
            train_set=encode_dataset(train, vocab, L),
            test_set=encode_dataset(test, vocab, L),
        )
        print(f"✓ Corpus ready: {len(train)} train / {len(test)} test sentences, vocabulary {vocab.size}")
        return self._data

    # ---------------------------------------------------------------------
    # Training
    # ---------------------------------------------------------------------

    def _fresh_bundle(self, data: CorpusSplit) -> ParameterBundle:
        return init_params(self.config.model_config(data.vocab.size), seed=derive_seed(self.seed, "init"))

    def phase1(self, data: CorpusSplit) -> Tuple[ParameterBundle, List[LossRecord]]:
        """Phase I bundle shared by deepssc and no_ii (trained once per run)."""
        if self._phase1 is None:
            bundle = self._fresh_bundle(data)
            self._phase1 = train_phase1(bundle, data.train_set, self.channel_config, self.train_config, self.loss_logger)
        return self._phase1

    def train_scheme(self, scheme: str, data: Optional[CorpusSplit] = None) -> Tuple[ParameterBundle, List[LossRecord]]:
        """Train one scheme and write checkpoints/<scheme>.pt.

        Args:
            scheme: deepssc (Phase I + II), no_ii (Phase I only) or integrated
            data: Prepared corpus (prepared on demand otherwise)

        Returns:
            Tuple of (bundle, loss records produced for this scheme)
        """
        if scheme not in SCHEMES:
            raise ConfigurationError(f"Unknown scheme '{scheme}' (expected one of {list(SCHEMES)})")
        data = data or self.prepare_data()
        started = time.time()

        phase1_bundle, phase1_records = self.phase1(data)
        if scheme == "no_ii":
            bundle, records = copy.deepcopy(phase1_bundle), list(phase1_records)
        elif scheme == "deepssc":
            bundle, phase2_records = train_phase2(
                copy.deepcopy(phase1_bundle), data.train_set, self.channel_config, self.train_config, self.loss_logger
            )
            records = phase1_records + phase2_records
        else:
            bundle = self._fresh_bundle(data)
            for name in RECEIVER_DECODERS["eve"]:
                bundle.collections[name].load_state_dict(phase1_bundle.collections[name].state_dict())
            bundle, records = train_integrated(
                bundle, data.train_set, self.channel_config, self.train_config, self.loss_logger
            )

        save_checkpoint(bundle, str(self.out_dir / "checkpoints" / f"{scheme}.pt"))
        print(f"✓ Trained {scheme} in {time.time() - started:.1f}s")
        return bundle, records

    # ---------------------------------------------------------------------
    # Evaluation
    # ---------------------------------------------------------------------

    @torch.no_grad()
    def evaluate(self, bundle: ParameterBundle, data: CorpusSplit, scheme: str, snr_db: float) -> SweepRow:
        """Score one scheme at one SNR over eval_fading_draws independent blocks.

        Each block carries eval_block_size test sentences (cycled through the
        test set) under one (h_B, h_E) draw. Draws depend on (seed, SNR) only,
        so every scheme sees the same channels.
        """
        cfg = self.config
        draws = cfg.get("experiment.eval_fading_draws")
        block = cfg.get("experiment.eval_block_size")
        chunk = max(block, cfg.get("experiment.eval_batch_size") // block * block)
        bundle.eval()

        channel = WiretapChannel(self.channel_config, derive_seed(self.seed, "eval", f"{snr_db:g}"))
        fading = channel.draw_realization(snr_db, n_blocks=draws)
        h_B = fading.h_B.repeat_interleave(block)
        h_E = fading.h_E.repeat_interleave(block)
        rows = draws * block

        triples = []
        ce_bob, ce_eve = [], []
        for start in range(0, rows, chunk):
            stop = min(start + chunk, rows)
            batch = stack_batch([data.test_set[k % len(data.test_set)] for k in range(start, stop)])
            realization = ChannelRealization(h_B[start:stop], h_E[start:stop], fading.P, fading.N, snr_db)

            x = encode_for_broadcast(batch, bundle)
            targets = batch.targets()
            ce_bob.append(sentence_cross_entropy(receive(x, batch, bundle, realization, "bob", channel.bob_rng), targets))
            ce_eve.append(sentence_cross_entropy(receive(x, batch, bundle, realization, "eve", channel.eve_rng), targets))

            decoded = decode_batch(batch, bundle, realization, {"bob": channel.bob_rng, "eve": channel.eve_rng})
            for k in range(batch.B):
                triples.append(
                    (
                        decode_tokens(batch.ids[k].tolist(), data.vocab),
                        decode_tokens(decoded["bob"].ids[k].tolist(), data.vocab),
                        decode_tokens(decoded["eve"].ids[k].tolist(), data.vocab),
                    )
                )

        # Per-block [CE_E - CE_B]^+ averaged over fading draws
        block_gap = (torch.cat(ce_eve) - torch.cat(ce_bob)).reshape(draws, block).mean(dim=1)
        proxy = float(block_gap.clamp(min=0.0).mean())

        eve_triples = [(s, s_e, []) for s, _, s_e in triples]
        capacity = ergodic_secrecy_capacity(
            self.channel_config,
            snr_db,
            draws=cfg.get("experiment.capacity_draws"),
            seed=derive_seed(self.seed, "capacity", f"{snr_db:g}"),
        )
        row = SweepRow(
            scheme=scheme,
            snr_db=float(snr_db),
            bleu1_bob=corpus_score(triples, WEIGHTS_1GRAM).score,
            bleu3_bob=corpus_score(triples, WEIGHTS_3GRAM).score,
            bleu1_eve=corpus_score(eve_triples, WEIGHTS_1GRAM).score,
            bleu3_eve=corpus_score(eve_triples, WEIGHTS_3GRAM).score,
            sbleu1=corpus_score(triples, WEIGHTS_1GRAM, metric="sbleu").score,
            sbleu3=corpus_score(triples, WEIGHTS_3GRAM, metric="sbleu").score,
            secrecy_proxy=proxy,
            capacity_secrecy_bits=capacity,
        )
        logger.info(
            f"{scheme} @ {snr_db:g} dB: bleu1 bob={row.bleu1_bob:.3f} eve={row.bleu1_eve:.3f} sbleu1={row.sbleu1:.3f}"
        )
        return row

    # ---------------------------------------------------------------------
    # Full pipeline
    # ---------------------------------------------------------------------

    def run_sweep(self) -> SweepResult:
        """Train every configured scheme and evaluate it at every sweep SNR."""
        print("\n" + "=" * 60)
        print("🔐 SSC Lab - SNR Sweep")
        print("=" * 60)

        schemes = self.config.schemes
        sweep = self.config.snr_sweep
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config.save(str(self.out_dir / "config_used.yaml"))

        print(f"\n[1/3] Preparing corpus...")
        data = self.prepare_data()
        data.vocab.save(str(self.out_dir / "vocab.txt"))

        result = SweepResult(
            metadata={
                "seed": self.seed,
                "profile": self.config.profile,
                "schemes": ", ".join(schemes),
                "snr_sweep_db": ", ".join(f"{snr:g}" for snr in sweep),
                "eval_fading_draws": self.config.get("experiment.eval_fading_draws"),
                "vocab_size": data.vocab.size,
                "train_sentences": len(data.train_set),
                "test_sentences": len(data.test_set),
            }
        )

        print(f"\n[2/3] Training {len(schemes)} scheme(s)...")
        bundles = {scheme: self.train_scheme(scheme, data)[0] for scheme in schemes}

        print(f"\n[3/3] Evaluating over {len(sweep)} SNR point(s)...")
        for scheme in schemes:
            for snr_db in sweep:
                row = self.evaluate(bundles[scheme], data, scheme, snr_db)
                result.add(row)
                print(f"  ✓ {scheme:<10} {snr_db:5g} dB  BLEU1 B/E {row.bleu1_bob:.3f}/{row.bleu1_eve:.3f}")

        return result


def run_experiment(config: ExperimentConfig) -> SweepResult:
    """Train all schemes and evaluate the sweep; outputs are not written."""
    return ExperimentOrchestrator(config).run_sweep()


def _print_scores(scores: Dict[str, float]):
    print("\n" + "=" * 60)
    print("Corpus Scores")
    print("=" * 60)
    for name, value in scores.items():
        print(f"  {name:<8} {value:.4f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssc-lab",
        description="SSC Lab experiment orchestrator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Commands:
  train         Train one scheme (checkpoint + loss CSV)
  sweep         Train all schemes and run the SNR sweep
  score         Score source/Bob/Eve text files with BLEU and S-BLEU
  inspect       Verify a saved checkpoint

Examples:
  %(prog)s sweep --config config/toy.cfg --seed 7 --out run1
  %(prog)s sweep --profile toy --set experiment.snr_sweep_db=0,18
  %(prog)s train --scheme no_ii --profile toy --out run1
  %(prog)s score --src a.txt --bob b.txt --eve e.txt
  %(prog)s inspect --checkpoint run1/checkpoints/deepssc.pt
        """,
    )

    parser.add_argument("command", choices=["train", "sweep", "score", "inspect"], help="Command to run")
    parser.add_argument("--config", "-c", help="Path to configuration file")
    parser.add_argument("--seed", type=int, help="Master seed (overrides experiment.seed)")
    parser.add_argument("--out", "-o", help="Output directory (overrides paths.output_dir)")
    parser.add_argument("--profile", choices=sorted(ExperimentConfig.PROFILES), default="default", help="Config profile")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="Override a config key")
    parser.add_argument("--scheme", choices=list(SCHEMES), default="deepssc", help="Scheme for the train command")
    parser.add_argument("--src", help="Source sentences (score)")
    parser.add_argument("--bob", help="Bob's reconstructions (score)")
    parser.add_argument("--eve", help="Eve's reconstructions (score)")
    parser.add_argument("--csv", help="Per-sentence score CSV (score)")
    parser.add_argument("--checkpoint", help="Checkpoint file (inspect)")
    parser.add_argument("--no-plots", action="store_true", help="Skip plot rendering")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    return parser


def _load_config(args) -> ExperimentConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if args.out:
        overrides.append(f"paths.output_dir={args.out}")
    config = ExperimentConfig(args.config, profile=args.profile, overrides=overrides)
    config.require_valid()
    return config


def main(argv=None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
    )

    try:
        if args.command == "score":
            if not (args.src and args.bob and args.eve):
                print("✗ --src, --bob and --eve are required for score")
                return 1
            _print_scores(score_files(args.src, args.bob, args.eve, args.csv))
            return 0

        if args.command == "inspect":
            if not args.checkpoint:
                print("✗ --checkpoint is required for inspect")
                return 1
            return 0 if CheckpointInspector(args.checkpoint).run() else 1

        config = _load_config(args)
        orchestrator = ExperimentOrchestrator(config)

        if args.command == "train":
            orchestrator.out_dir.mkdir(parents=True, exist_ok=True)
            _, records = orchestrator.train_scheme(args.scheme)
            if records:
                last = records[-1]
                print(f"  Final {last.phase}: ce_bob={last.ce_bob:.4f} ce_eve={last.ce_eve:.4f}")
            print(f"📁 Checkpoint: {orchestrator.out_dir / 'checkpoints' / (args.scheme + '.pt')}")
            return 0

        config.print_summary()
        result = orchestrator.run_sweep()
        written = emit_outputs(result, str(orchestrator.out_dir), plots=not args.no_plots)

        print("\n" + "=" * 60)
        print("✓ Sweep Complete!")
        print("=" * 60)
        for name, path in written.items():
            print(f"  {name:<8} {path}")
        return 0

    except SSCError as e:
        logger.debug("SSC error", exc_info=True)
        print(f"✗ {e}")
        return 1
    except OSError as e:
        print(f"✗ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
