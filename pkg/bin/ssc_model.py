#!/usr/bin/env python3
"""
SSC Model
Semantic/channel encoders and Bob/Eve decoders, with end-to-end forward passes.

The six parameter collections live in one ParameterBundle:

    alpha    semantic encoder T^S   (Transformer encoder)
    beta     channel encoder  T^C   (dense layers, output paired to complex)
    chi_B    Bob's channel decoder
    delta_B  Bob's semantic decoder (Transformer decoder)
    chi_E    Eve's channel decoder
    delta_E  Eve's semantic decoder

Each collection can be frozen independently. Bob's and Eve's decoders share
shapes so one can be copied into the other.
"""

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import torch
import torch.nn as nn

from ssc_channel import ChannelRealization, SymbolBlock, equalize, normalize_power, to_real, transmit
from ssc_corpus import END_ID, PAD_ID, START_ID, SentenceBatch
from ssc_errors import CheckpointError, ConfigurationError, ContractViolationError

logger = logging.getLogger(__name__)

COLLECTIONS = ("alpha", "beta", "chi_B", "delta_B", "chi_E", "delta_E")
RECEIVER_DECODERS = {"bob": ("chi_B", "delta_B"), "eve": ("chi_E", "delta_E")}
BOB_TO_EVE = {"chi_B": "chi_E", "delta_B": "delta_E"}
CHECKPOINT_FORMAT_VERSION = 1

Batch = Union[SentenceBatch, torch.Tensor]


@dataclass
class ModelConfig:
    """Network dimensions; E (embedding) equals V (d_model)."""

    vocab_size: int
    d_model: int = 128
    symbol_dim: int = 16
    layers: int = 3
    heads: int = 8
    max_len: int = 30
    ff_dim: int = 512
    hidden_units: int = 256
    dropout: float = 0.1

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "symbol_dim", "layers", "heads", "max_len", "ff_dim", "hidden_units"):
            if int(getattr(self, name)) <= 0:
                raise ConfigurationError(f"model.{name} must be positive, got {getattr(self, name)}")
        if self.d_model % self.heads:
            raise ConfigurationError(f"d_model {self.d_model} is not divisible by heads {self.heads}")
        if self.symbol_dim % 2:
            raise ConfigurationError(f"symbol_dim {self.symbol_dim} must be even for complex pairing")
        if self.max_len < 3:
            raise ConfigurationError(f"max_len must be at least 3, got {self.max_len}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def symbols_per_sentence(self) -> int:
        """M = L * N / 2 complex symbols."""
        return self.max_len * self.symbol_dim // 2


def sinusoidal_positions(max_len: int, d_model: int) -> torch.Tensor:
    position = torch.arange(max_len, dtype=torch.float32).unsqueeze(1)
    div_term = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float32) * (-math.log(10000.0) / d_model))
    table = torch.zeros(max_len, d_model)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term[: d_model // 2])
    return table


def causal_mask(length: int, device=None) -> torch.Tensor:
    """True above the diagonal: position t may not look at t' > t."""
    return torch.triu(torch.ones(length, length, dtype=torch.bool, device=device), diagonal=1)


class TokenEmbedding(nn.Module):
    """Word embedding plus fixed sinusoidal position encoding."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.scale = math.sqrt(config.d_model)
        self.embedding = nn.Embedding(config.vocab_size, config.d_model, padding_idx=PAD_ID)
        self.register_buffer("positions", sinusoidal_positions(config.max_len, config.d_model), persistent=False)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        embedded = self.embedding(ids) * self.scale + self.positions[: ids.shape[1]].to(self.embedding.weight.dtype)
        return self.dropout(embedded)


class SemanticEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.embed = TokenEmbedding(config)
        layer = nn.TransformerEncoderLayer(
            config.d_model, config.heads, config.ff_dim, config.dropout, activation="gelu", batch_first=True
        )
        self.layers = nn.TransformerEncoder(layer, config.layers, enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        return self.layers(self.embed(ids), src_key_padding_mask=pad_mask)


class ChannelEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.dense = nn.Sequential(
            nn.Linear(config.d_model, config.hidden_units),
            nn.GELU(),
            nn.Linear(config.hidden_units, config.symbol_dim),
        )

    def forward(self, semantic: torch.Tensor) -> torch.Tensor:
        return self.dense(semantic)


class ChannelDecoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.symbol_dim = config.symbol_dim
        self.dense = nn.Sequential(
            nn.Linear(config.symbol_dim, config.hidden_units),
            nn.GELU(),
            nn.Linear(config.hidden_units, config.d_model),
        )

    def forward(self, received: torch.Tensor) -> torch.Tensor:
        return self.dense(received)


class SemanticDecoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.embed = TokenEmbedding(config)
        layer = nn.TransformerDecoderLayer(
            config.d_model, config.heads, config.ff_dim, config.dropout, activation="gelu", batch_first=True
        )
        self.layers = nn.TransformerDecoder(layer, config.layers)
        self.output = nn.Linear(config.d_model, config.vocab_size)

    def forward(self, ids: torch.Tensor, memory: torch.Tensor, memory_pad_mask: Optional[torch.Tensor]) -> torch.Tensor:
        hidden = self.layers(
            self.embed(ids),
            memory,
            tgt_mask=causal_mask(ids.shape[1], ids.device),
            memory_key_padding_mask=memory_pad_mask,
        )
        return self.output(hidden)


_COLLECTION_TYPES = {
    "alpha": SemanticEncoder,
    "beta": ChannelEncoder,
    "chi_B": ChannelDecoder,
    "delta_B": SemanticDecoder,
    "chi_E": ChannelDecoder,
    "delta_E": SemanticDecoder,
}


class ParameterBundle(nn.Module):
    """The six named parameter collections with per-collection freeze flags."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.collections = nn.ModuleDict({name: _COLLECTION_TYPES[name](config) for name in COLLECTIONS})
        self.frozen = set()

    def __getitem__(self, name: str) -> nn.Module:
        self._check_name(name)
        return self.collections[name]

    @property
    def dtype(self) -> torch.dtype:
        return self.collections["beta"].dense[0].weight.dtype

    def _check_name(self, name: str):
        if name not in COLLECTIONS:
            raise ContractViolationError(f"Unknown parameter collection '{name}' (expected one of {COLLECTIONS})")

    def freeze(self, *names: str):
        """Stop updates to the named collections; frozen modules run in eval mode."""
        for name in names:
            self._check_name(name)
            self.frozen.add(name)
            for param in self.collections[name].parameters():
                param.requires_grad_(False)
            self.collections[name].eval()

    def unfreeze(self, *names: str):
        for name in names:
            self._check_name(name)
            self.frozen.discard(name)
            for param in self.collections[name].parameters():
                param.requires_grad_(True)
            self.collections[name].train(self.training)

    def freeze_only(self, *names: str):
        self.unfreeze(*COLLECTIONS)
        self.freeze(*names)

    def is_frozen(self, name: str) -> bool:
        self._check_name(name)
        return name in self.frozen

    def train(self, mode: bool = True):
        super().train(mode)
        for name in self.frozen:
            self.collections[name].eval()
        return self

    def trainable_parameters(self) -> List[nn.Parameter]:
        return [p for name in COLLECTIONS if name not in self.frozen for p in self.collections[name].parameters()]

    def named_collection_parameters(self, name: str) -> Dict[str, nn.Parameter]:
        self._check_name(name)
        return dict(self.collections[name].named_parameters())

    def collection_state(self, name: str) -> Dict[str, torch.Tensor]:
        """Detached copy of one collection's tensors."""
        self._check_name(name)
        return {key: value.detach().clone() for key, value in self.collections[name].state_dict().items()}

    def copy_collection(self, source: str, target: str):
        """Load source's weights into target (e.g. Bob's decoders into Eve's slots)."""
        self._check_name(source)
        self._check_name(target)
        self.collections[target].load_state_dict(self.collections[source].state_dict())

    def decoders_for(self, receiver: str):
        if receiver not in RECEIVER_DECODERS:
            raise ContractViolationError(f"Unknown receiver '{receiver}' (expected 'bob' or 'eve')")
        chi, delta = RECEIVER_DECODERS[receiver]
        return self.collections[chi], self.collections[delta]


def init_params(config: ModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> ParameterBundle:
    """Deterministic initialization; Bob's and Eve's decoders get independent draws."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        bundle = ParameterBundle(config)
    return bundle.to(dtype)


def _ids(S: Batch) -> torch.Tensor:
    return S.ids if isinstance(S, SentenceBatch) else S


def semantic_encode(S: Batch, alpha: SemanticEncoder) -> torch.Tensor:
    """[B, L] ids -> semantic matrix [B, L, V]; pad slots are masked out of attention."""
    ids = _ids(S)
    vocab_size = alpha.embed.embedding.num_embeddings
    if ids.dim() != 2 or ids.shape[1] > alpha.embed.positions.shape[0]:
        raise ContractViolationError(f"Expected [B, L<={alpha.embed.positions.shape[0]}] ids, got {tuple(ids.shape)}")
    if ids.min() < 0 or ids.max() >= vocab_size:
        raise ContractViolationError(f"Token ids must lie in [0, {vocab_size})")
    return alpha(ids, ids.eq(PAD_ID))


def channel_encode(M: torch.Tensor, beta: ChannelEncoder, token_mask: Optional[torch.Tensor] = None) -> SymbolBlock:
    """[B, L, V] -> normalized complex block [B, L*N/2]."""
    if M.dim() != 3:
        raise ContractViolationError(f"Semantic matrix must be [B, L, V], got {tuple(M.shape)}")
    return normalize_power(beta(M), token_mask)


def channel_decode(Xhat: SymbolBlock, chi: ChannelDecoder) -> torch.Tensor:
    """Equalized [B, L*N/2] complex symbols -> [B, L, V]."""
    B, M = Xhat.shape
    per_token = chi.symbol_dim // 2
    if M % per_token:
        raise ContractViolationError(f"{M} symbols do not divide into tokens of {per_token} symbols")
    return chi(to_real(Xhat.symbols, M // per_token))


def semantic_decode_train(
    Mhat: torch.Tensor, S_shifted: Batch, delta: SemanticDecoder, memory_pad_mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Teacher-forced logits [B, L, vocab]; S_shifted starts with the start token."""
    ids = _ids(S_shifted)
    if ids.shape[0] != Mhat.shape[0]:
        raise ContractViolationError(f"Batch sizes differ: ids {ids.shape[0]} vs memory {Mhat.shape[0]}")
    return delta(ids, Mhat, memory_pad_mask)


@torch.no_grad()
def semantic_decode_infer(
    Mhat: torch.Tensor, delta: SemanticDecoder, max_len: int, memory_pad_mask: Optional[torch.Tensor] = None
) -> SentenceBatch:
    """Greedy decoding from the start token until end or max_len slots."""
    B = Mhat.shape[0]
    ids = torch.full((B, 1), START_ID, dtype=torch.long, device=Mhat.device)
    finished = torch.zeros(B, dtype=torch.bool, device=Mhat.device)

    for _ in range(max_len - 1):
        logits = delta(ids, Mhat, memory_pad_mask)[:, -1]
        next_ids = logits.argmax(dim=-1)
        next_ids = torch.where(finished, torch.full_like(next_ids, PAD_ID), next_ids)
        ids = torch.cat([ids, next_ids.unsqueeze(1)], dim=1)
        finished |= next_ids.eq(END_ID)
        if finished.all():
            break

    if ids.shape[1] < max_len:
        padding = torch.full((B, max_len - ids.shape[1]), PAD_ID, dtype=torch.long, device=ids.device)
        ids = torch.cat([ids, padding], dim=1)
    return SentenceBatch(ids)


def encode_for_broadcast(S: Batch, bundle: ParameterBundle) -> SymbolBlock:
    """Alice's side: one normalized block heard by both receivers."""
    ids = _ids(S)
    M = semantic_encode(ids, bundle["alpha"])
    return channel_encode(M, bundle["beta"], ~ids.eq(PAD_ID))


def receive(
    x: SymbolBlock,
    S: Batch,
    bundle: ParameterBundle,
    realization: ChannelRealization,
    receiver: str,
    rng: torch.Generator,
) -> torch.Tensor:
    """One receiver's side: channel, equalization, decoders; returns logits."""
    ids = _ids(S)
    chi, delta = bundle.decoders_for(receiver)
    h = realization.fading_for(receiver)
    y = transmit(x, h, realization.P, realization.N, rng)
    Mhat = channel_decode(equalize(y, h, realization.P), chi)
    return semantic_decode_train(Mhat, ids, delta, ids.eq(PAD_ID))


def forward(
    S: Batch, bundle: ParameterBundle, realization: ChannelRealization, receiver: str, rng: torch.Generator
) -> torch.Tensor:
    """Full differentiable chain for one receiver: encode, transmit, equalize, decode."""
    return receive(encode_for_broadcast(S, bundle), S, bundle, realization, receiver, rng)


@torch.no_grad()
def decode_batch(
    S: Batch,
    bundle: ParameterBundle,
    realization: ChannelRealization,
    rngs: Dict[str, torch.Generator],
    max_len: Optional[int] = None,
) -> Dict[str, SentenceBatch]:
    """Greedy reconstructions at Bob and Eve from one broadcast block."""
    ids = _ids(S)
    pad_mask = ids.eq(PAD_ID)
    x = encode_for_broadcast(ids, bundle)
    decoded = {}
    for receiver, rng in rngs.items():
        chi, delta = bundle.decoders_for(receiver)
        h = realization.fading_for(receiver)
        y = transmit(x, h, realization.P, realization.N, rng)
        Mhat = channel_decode(equalize(y, h, realization.P), chi)
        decoded[receiver] = semantic_decode_infer(Mhat, delta, max_len or ids.shape[1], pad_mask)
    return decoded


def save_checkpoint(bundle: ParameterBundle, path: str):
    """Write all six collections under "<collection>/<tensor>" keys plus the config."""
    state = {}
    for name in COLLECTIONS:
        for key, value in bundle.collections[name].state_dict().items():
            state[f"{name}/{key}"] = value.detach().cpu()
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": asdict(bundle.config),
        "frozen": sorted(bundle.frozen),
        "state": state,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    logger.info(f"Checkpoint saved: {path}")


def read_checkpoint(path: str) -> dict:
    """Load the raw checkpoint container."""
    if not Path(path).is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or not {"model_config", "state"} <= set(payload):
        raise CheckpointError(f"Checkpoint {path} is missing 'model_config' or 'state'")
    return payload


def load_checkpoint(
    path: str, into: Optional[ParameterBundle] = None, mapping: Optional[Dict[str, str]] = None
) -> ParameterBundle:
    """Restore a bundle from disk.

    Args:
        path: Checkpoint file
        into: Existing bundle to load into (a fresh one is built from the stored config otherwise)
        mapping: Optional {stored collection: target collection}; only these are loaded

    Returns:
        The loaded bundle
    """
    payload = read_checkpoint(path)
    if into is None:
        try:
            into = init_params(ModelConfig(**payload["model_config"]), seed=0)
        except (TypeError, ConfigurationError) as e:
            raise CheckpointError(f"Checkpoint {path} has an invalid model config: {e}") from e
        for name in payload.get("frozen", []):
            into.freeze(name)

    mapping = mapping or {name: name for name in COLLECTIONS}
    for source, target in mapping.items():
        if source not in COLLECTIONS or target not in COLLECTIONS:
            raise CheckpointError(f"Invalid collection mapping {source} -> {target}")
        prefix = f"{source}/"
        tensors = {key[len(prefix):]: value for key, value in payload["state"].items() if key.startswith(prefix)}
        if not tensors:
            raise CheckpointError(f"Checkpoint {path} has no tensors for collection '{source}'")
        target_module = into.collections[target]
        expected = target_module.state_dict()
        if set(tensors) != set(expected):
            raise CheckpointError(f"Collection '{source}' does not match the layout of '{target}'")
        for key, value in tensors.items():
            if value.shape != expected[key].shape:
                raise CheckpointError(
                    f"Shape mismatch for {target}/{key}: checkpoint {tuple(value.shape)} vs {tuple(expected[key].shape)}"
                )
        target_module.load_state_dict({key: value.to(expected[key].dtype) for key, value in tensors.items()})

    logger.info(f"Checkpoint loaded: {path} ({', '.join(f'{s}->{t}' for s, t in mapping.items())})")
    return into
