#!/usr/bin/env python3
"""
SSC Training
Losses, the secrecy proxy and the three training procedures.

    Phase I, stage A   alpha, beta, chi_B, delta_B minimize CE at Bob
    Phase I, stage B   Bob's decoders copied to Eve; alpha, beta frozen; Eve minimizes her CE
    Phase II           Eve frozen; alpha, beta, chi_B, delta_B minimize L_SSC = CE_B - CE_E
    Integrated         Eve frozen; one phase under (w1 + w2) CE_B - w2 CE_E

Batch order, channel draws and dropout are all keyed on (seed, stream, epoch),
so Phase II with the Eve term switched off is exactly Phase I training
continued from the next epoch, and the integrated run with (w1, w2) = (1, 0)
retraces stage A.
"""

import csv
import logging
import math
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from scipy.special import xlogy

from ssc_channel import ChannelConfig, WiretapChannel
from ssc_corpus import PAD_ID, SentenceBatch, TokenSequence, batch_iterator, stack_batch
from ssc_errors import ConfigurationError, ContractViolationError, TrainingDivergenceError
from ssc_model import BOB_TO_EVE, ParameterBundle, encode_for_broadcast, receive

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ["phase", "step", "ce_bob", "ce_eve", "l_ssc", "secrecy_proxy", "snr_db"]
RELIABILITY_STREAM = "alice_bob"
EAVESDROPPER_STREAM = "eve"


def derive_seed(master: int, *labels) -> int:
    """Independent 32-bit seed for a (master, labels...) combination."""
    entropy = [int(master)] + [zlib.crc32(str(label).encode("utf-8")) for label in labels]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass
class TrainConfig:
    """Optimization settings.

    epochs_integrated 0 means stage A + Phase II epochs; phase2_learning_rate 0
    means Phase II steps with learning_rate.
    """

    learning_rate: float = 1e-4
    phase2_learning_rate: float = 0.0
    batch_size: int = 128
    epochs_stage_a: int = 20
    epochs_stage_b: int = 10
    epochs_phase2: int = 10
    epochs_integrated: int = 0
    snr_train_low_db: float = 0.0
    snr_train_high_db: float = 18.0
    w1: float = 1.0
    w2: float = 1.0
    eve_weight: float = 1.0
    clamp_ssc: bool = False
    optimizer: str = "sgd"
    grad_clip: float = 0.0
    max_steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError(f"training.learning_rate must be positive, got {self.learning_rate}")
        if not self.phase2_learning_rate >= 0:
            raise ConfigurationError(f"training.phase2_learning_rate must be >= 0, got {self.phase2_learning_rate}")
        if self.batch_size <= 0:
            raise ConfigurationError(f"training.batch_size must be positive, got {self.batch_size}")
        if self.w1 < 0 or self.w2 < 0:
            raise ConfigurationError(f"training.w1/w2 must be non-negative, got {self.w1}, {self.w2}")
        if self.snr_train_low_db > self.snr_train_high_db:
            raise ConfigurationError("training SNR range is empty (low > high)")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"training.optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        for name in ("epochs_stage_a", "epochs_stage_b", "epochs_phase2", "epochs_integrated", "max_steps"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"training.{name} must be >= 0")

    @property
    def integrated_epochs(self) -> int:
        return self.epochs_integrated or (self.epochs_stage_a + self.epochs_phase2)

    @property
    def phase2_lr(self) -> float:
        return self.phase2_learning_rate or self.learning_rate


@dataclass
class LossRecord:
    phase: str
    step: int
    ce_bob: float
    ce_eve: float
    l_ssc: float
    secrecy_proxy: float
    snr_db: float

    @classmethod
    def from_losses(cls, phase: str, step: int, ce_bob: float, ce_eve: float, snr_db: float) -> "LossRecord":
        return cls(phase, step, ce_bob, ce_eve, ce_bob - ce_eve, secrecy_proxy(ce_bob, ce_eve), snr_db)


class LossLogger:
    """Appends LossRecords to a CSV file."""

    def __init__(self, path: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow(LOSS_COLUMNS)

    def append(self, record: LossRecord):
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow([getattr(record, column) for column in LOSS_COLUMNS])

    def read(self) -> List[Dict[str, str]]:
        with open(self.path, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))


# -------------------------------------------------------------------------
# Losses
# -------------------------------------------------------------------------


def cross_entropy_loss(logits: torch.Tensor, targets) -> torch.Tensor:
    """Mean -log softmax(logits)[target] over non-pad target positions.

    Args:
        logits: [B, L, vocab] next-token scores
        targets: [B, L] next-token ids (SentenceBatch or tensor); pad positions are skipped
    """
    target_ids = targets.ids if isinstance(targets, SentenceBatch) else targets
    if logits.shape[:2] != target_ids.shape:
        raise ContractViolationError(f"logits {tuple(logits.shape)} do not match targets {tuple(target_ids.shape)}")
    if target_ids.eq(PAD_ID).all():
        raise ContractViolationError("Cross entropy of an all-pad batch is undefined")
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), target_ids.reshape(-1), ignore_index=PAD_ID)


def sentence_cross_entropy(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Per-row mean CE over non-pad targets, shape [B]; all-pad rows give 0."""
    nll = F.cross_entropy(logits.transpose(1, 2), targets, ignore_index=PAD_ID, reduction="none")
    occupied = targets.ne(PAD_ID)
    return nll.sum(dim=1) / occupied.sum(dim=1).clamp(min=1)


def ssc_loss(ce_bob, ce_eve, clamp: bool = False):
    """L_SSC = CE_B - CE_E; clamp keeps only the negative part, min(., 0)."""
    difference = ce_bob - ce_eve
    if not clamp:
        return difference
    if isinstance(difference, torch.Tensor):
        return torch.clamp(difference, max=0.0)
    return min(difference, 0.0)


def integrated_loss(ce_bob, ce_eve, w1: float, w2: float):
    """(w1 + w2) CE_B - w2 CE_E."""
    if w1 < 0 or w2 < 0:
        raise ConfigurationError(f"Integrated loss weights must be non-negative, got w1={w1}, w2={w2}")
    return (w1 + w2) * ce_bob - w2 * ce_eve


def secrecy_proxy(ce_bob: float, ce_eve: float) -> float:
    """max(CE_E - CE_B, 0): per-batch estimate of the ergodic secrecy capacity approximation."""
    return max(float(ce_eve) - float(ce_bob), 0.0)


# -------------------------------------------------------------------------
# Optimization
# -------------------------------------------------------------------------


def collect_gradients(bundle: ParameterBundle) -> Dict[str, Dict[str, torch.Tensor]]:
    """Current .grad of every unfrozen parameter, grouped by collection."""
    gradients = {}
    for name in bundle.collections:
        if bundle.is_frozen(name):
            continue
        gradients[name] = {
            key: param.grad for key, param in bundle.named_collection_parameters(name).items() if param.grad is not None
        }
    return gradients


def optimizer_step(
    bundle: ParameterBundle, gradients: Dict[str, Dict[str, torch.Tensor]], eta: float
) -> ParameterBundle:
    """theta <- theta - eta * g for every unfrozen collection; frozen ones are left untouched."""
    with torch.no_grad():
        for name, grads in gradients.items():
            if bundle.is_frozen(name):
                continue
            params = bundle.named_collection_parameters(name)
            for key, grad in grads.items():
                if key not in params:
                    raise ContractViolationError(f"Collection '{name}' has no parameter '{key}'")
                if grad.shape != params[key].shape:
                    raise ContractViolationError(
                        f"Gradient shape {tuple(grad.shape)} does not match {name}/{key} {tuple(params[key].shape)}"
                    )
                params[key].sub_(eta * grad)
    return bundle


class _Stepper:
    """Plain SGD through optimizer_step, or Adam as the configured alternative."""

    def __init__(self, bundle: ParameterBundle, config: TrainConfig, learning_rate: float):
        self.bundle = bundle
        self.config = config
        self.learning_rate = learning_rate
        self.adam = None
        if config.optimizer == "adam":
            self.adam = torch.optim.Adam(bundle.trainable_parameters(), lr=learning_rate)

    def zero_grad(self):
        for param in self.bundle.parameters():
            param.grad = None

    def step(self):
        if self.config.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(self.bundle.trainable_parameters(), self.config.grad_clip)
        if self.adam is not None:
            self.adam.step()
        else:
            optimizer_step(self.bundle, collect_gradients(self.bundle), self.learning_rate)


# -------------------------------------------------------------------------
# Training loops
# -------------------------------------------------------------------------

Objective = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


def _run_stage(
    bundle: ParameterBundle,
    dataset: Sequence[TokenSequence],
    channel_config: ChannelConfig,
    config: TrainConfig,
    phase: str,
    stream: str,
    epochs: range,
    objective: Objective,
    grad_receivers: Tuple[str, ...],
    loss_logger: Optional[LossLogger],
    learning_rate: Optional[float] = None,
) -> List[LossRecord]:
    stepper = _Stepper(bundle, config, learning_rate or config.learning_rate)
    bundle.train()
    records = []
    step = 0

    for epoch in epochs:
        channel = WiretapChannel(channel_config, derive_seed(config.seed, stream, "channel", epoch))
        torch.manual_seed(derive_seed(config.seed, stream, "dropout", epoch))
        batches = batch_iterator(dataset, config.batch_size, derive_seed(config.seed, stream, "batches", epoch))
        epoch_losses = []

        for batch in batches:
            if config.max_steps and step >= config.max_steps:
                break
            step += 1
            snr_db = channel.draw_snr_db(config.snr_train_low_db, config.snr_train_high_db)
            realization = channel.draw_realization(snr_db)
            targets = batch.targets()

            with torch.set_grad_enabled(bool(grad_receivers)):
                x = encode_for_broadcast(batch, bundle)
            losses = {}
            for receiver in ("bob", "eve"):
                with torch.set_grad_enabled(receiver in grad_receivers):
                    logits = receive(x, batch, bundle, realization, receiver, channel.rng_for(receiver))
                    losses[receiver] = cross_entropy_loss(logits, targets)

            loss = objective(losses["bob"], losses["eve"])
            ce_bob, ce_eve = losses["bob"].item(), losses["eve"].item()
            if not (torch.isfinite(loss) and math.isfinite(ce_bob) and math.isfinite(ce_eve)):
                logger.error(f"Divergence in {phase} at step {step}")
                raise TrainingDivergenceError(
                    phase, step, {"ce_bob": ce_bob, "ce_eve": ce_eve, "loss": loss.item(), "snr_db": round(snr_db, 3)}
                )

            stepper.zero_grad()
            loss.backward()
            stepper.step()

            record = LossRecord.from_losses(phase, step, ce_bob, ce_eve, snr_db)
            records.append(record)
            epoch_losses.append(record)
            if loss_logger:
                loss_logger.append(record)
            logger.debug(f"{phase} step {step}: ce_bob={ce_bob:.4f} ce_eve={ce_eve:.4f} snr={snr_db:.2f} dB")

        if epoch_losses:
            logger.info(
                f"{phase} epoch {epoch}: ce_bob={np.mean([r.ce_bob for r in epoch_losses]):.4f} "
                f"ce_eve={np.mean([r.ce_eve for r in epoch_losses]):.4f}"
            )

    return records


def train_phase1(
    bundle: ParameterBundle,
    dataset: Sequence[TokenSequence],
    channel_config: ChannelConfig,
    config: TrainConfig,
    loss_logger: Optional[LossLogger] = None,
) -> Tuple[ParameterBundle, List[LossRecord]]:
    """Reliability training: stage A (Alice-Bob) then stage B (Eve by transfer learning)."""
    logger.info(f"Phase I stage A: {config.epochs_stage_a} epochs over {len(dataset)} sentences")
    bundle.freeze_only("chi_E", "delta_E")
    records = _run_stage(
        bundle, dataset, channel_config, config,
        phase="phase1_a", stream=RELIABILITY_STREAM, epochs=range(config.epochs_stage_a),
        objective=lambda ce_bob, ce_eve: ce_bob, grad_receivers=("bob",), loss_logger=loss_logger,
    )

    logger.info(f"Phase I stage B: Eve loads Bob's decoders, {config.epochs_stage_b} epochs")
    for source, target in BOB_TO_EVE.items():
        bundle.copy_collection(source, target)
    bundle.freeze_only("alpha", "beta", "chi_B", "delta_B")
    records += _run_stage(
        bundle, dataset, channel_config, config,
        phase="phase1_b", stream=EAVESDROPPER_STREAM, epochs=range(config.epochs_stage_b),
        objective=lambda ce_bob, ce_eve: ce_eve, grad_receivers=("eve",), loss_logger=loss_logger,
    )

    bundle.freeze_only()
    return bundle, records


def train_phase2(
    bundle: ParameterBundle,
    dataset: Sequence[TokenSequence],
    channel_config: ChannelConfig,
    config: TrainConfig,
    loss_logger: Optional[LossLogger] = None,
) -> Tuple[ParameterBundle, List[LossRecord]]:
    """Security training: Eve's decoders frozen, Alice and Bob minimize L_SSC."""
    logger.info(
        f"Phase II: {config.epochs_phase2} epochs, lr={config.phase2_lr:g}, "
        f"eve_weight={config.eve_weight}, clamp={config.clamp_ssc}"
    )
    bundle.freeze_only("chi_E", "delta_E")
    start = config.epochs_stage_a
    records = _run_stage(
        bundle, dataset, channel_config, config,
        phase="phase2", stream=RELIABILITY_STREAM, epochs=range(start, start + config.epochs_phase2),
        objective=lambda ce_bob, ce_eve: ssc_loss(ce_bob, config.eve_weight * ce_eve, config.clamp_ssc),
        grad_receivers=("bob", "eve"), loss_logger=loss_logger, learning_rate=config.phase2_lr,
    )
    bundle.freeze_only()
    return bundle, records


def train_integrated(
    bundle: ParameterBundle,
    dataset: Sequence[TokenSequence],
    channel_config: ChannelConfig,
    config: TrainConfig,
    loss_logger: Optional[LossLogger] = None,
) -> Tuple[ParameterBundle, List[LossRecord]]:
    """Single-phase baseline under the weighted loss; Eve's decoders must already be bootstrapped."""
    logger.info(f"Integrated training: {config.integrated_epochs} epochs, w1={config.w1}, w2={config.w2}")
    bundle.freeze_only("chi_E", "delta_E")
    records = _run_stage(
        bundle, dataset, channel_config, config,
        phase="integrated", stream=RELIABILITY_STREAM, epochs=range(config.integrated_epochs),
        objective=lambda ce_bob, ce_eve: integrated_loss(ce_bob, ce_eve, config.w1, config.w2),
        grad_receivers=("bob", "eve"), loss_logger=loss_logger,
    )
    bundle.freeze_only()
    return bundle, records


@torch.no_grad()
def evaluate_cross_entropy(
    bundle: ParameterBundle,
    dataset: Sequence[TokenSequence],
    channel_config: ChannelConfig,
    snr_db: float,
    receiver: str,
    seed: int = 0,
    batch_size: int = 64,
) -> float:
    """Token-weighted CE of one receiver over a validation set at a fixed SNR."""
    was_training = bundle.training
    bundle.eval()
    channel = WiretapChannel(channel_config, seed)
    total, tokens = 0.0, 0
    for start in range(0, len(dataset), batch_size):
        batch = stack_batch(dataset[start : start + batch_size])
        realization = channel.draw_realization(snr_db)
        logits = receive(
            encode_for_broadcast(batch, bundle), batch, bundle, realization, receiver, channel.rng_for(receiver)
        )
        targets = batch.targets()
        count = int(targets.ne(PAD_ID).sum())
        total += cross_entropy_loss(logits, targets).item() * count
        tokens += count
    bundle.train(was_training)
    return total / tokens


# -------------------------------------------------------------------------
# Variational bound on an enumerable model
# -------------------------------------------------------------------------


@dataclass
class BoundReport:
    """All quantities in nats."""

    entropy: float
    mutual_information: float
    cross_entropy: float
    lower_bound: float
    slack: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def true_posterior(p_s: np.ndarray, channel: np.ndarray) -> np.ndarray:
    """p(s | y) as a [Y, S] array from prior p(s) and likelihood p(y | s) [S, Y]."""
    joint = p_s[:, None] * channel
    return (joint / joint.sum(axis=0, keepdims=True)).T


def variational_bound_check(p_s: np.ndarray, channel: np.ndarray, decoder: np.ndarray) -> BoundReport:
    """Exact H(s), I(s; y) and decoder cross entropy for a discrete source and channel.

    Args:
        p_s: Source distribution [S]
        channel: Likelihood p(y | s) [S, Y], rows sum to 1
        decoder: Any decoder distribution q(s | y) [Y, S], rows sum to 1

    Returns:
        BoundReport with lower_bound = H(s) - CE and slack = I(s; y) - lower_bound >= 0
    """
    p_s = np.asarray(p_s, dtype=np.float64)
    channel = np.asarray(channel, dtype=np.float64)
    decoder = np.asarray(decoder, dtype=np.float64)
    if channel.shape[0] != p_s.shape[0] or decoder.shape != channel.shape[::-1]:
        raise ContractViolationError(
            f"Shape mismatch: p_s {p_s.shape}, channel {channel.shape}, decoder {decoder.shape}"
        )

    joint = p_s[:, None] * channel
    p_y = joint.sum(axis=0)
    entropy = float(-xlogy(p_s, p_s).sum())
    conditional_entropy = float(-xlogy(joint, joint / np.where(p_y > 0, p_y, 1.0)).sum())
    cross_entropy = float(-xlogy(joint, decoder.T).sum())
    mutual_information = entropy - conditional_entropy
    lower_bound = entropy - cross_entropy
    return BoundReport(entropy, mutual_information, cross_entropy, lower_bound, mutual_information - lower_bound)
