#!/usr/bin/env python3
"""
SSC Channel
Wiretap channel simulation: path loss, block Rayleigh fading and AWGN.

Alice broadcasts one normalized symbol block; Bob and Eve each receive
y = sqrt(P) * h * x + w through their own fading coefficient and noise,
then equalize with perfect CSI. Everything here is plain torch arithmetic,
so gradients flow from the receivers back into the encoders.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import torch

from ssc_errors import ConfigurationError, ContractViolationError, DegenerateChannelError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 2.998e8
THERMAL_NOISE_DBM_PER_HZ = -174.0
MIN_FADING_MAGNITUDE = 1e-12
NORMALIZATION_TOLERANCE = 1e-6

Fading = Union[complex, torch.Tensor]


def snr_db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass
class ChannelConfig:
    """Wiretap geometry and radio parameters; defaults follow the 1 km / 3 km setup."""

    carrier_hz: float = 1e9
    bandwidth_hz: float = 2e7
    noise_figure_db: float = 10.0
    d_bob_m: float = 1000.0
    d_eve_m: float = 3000.0

    def __post_init__(self):
        for name in ("carrier_hz", "bandwidth_hz", "noise_figure_db", "d_bob_m", "d_eve_m"):
            value = float(getattr(self, name))
            if not value > 0 or not math.isfinite(value):
                raise ConfigurationError(f"channel.{name} must be strictly positive, got {value}")
            setattr(self, name, value)

    @property
    def mu(self) -> float:
        return path_loss_mu(self.carrier_hz)

    @property
    def noise_watts(self) -> float:
        return noise_power(self.bandwidth_hz, self.noise_figure_db)


@dataclass
class ChannelRealization:
    """Fading for one coherence block (or one per block when tensors are given)."""

    h_B: Fading
    h_E: Fading
    P: float
    N: float
    snr_db: float = float("nan")

    def __post_init__(self):
        if not (self.P > 0 and self.N > 0):
            raise ContractViolationError(f"P and N must be positive (P={self.P}, N={self.N})")
        for name in ("h_B", "h_E"):
            value = torch.as_tensor(getattr(self, name))
            if not torch.isfinite(torch.view_as_real(value.to(torch.complex128))).all():
                raise ContractViolationError(f"{name} must be finite")

    def fading_for(self, receiver: str) -> Fading:
        if receiver == "bob":
            return self.h_B
        if receiver == "eve":
            return self.h_E
        raise ContractViolationError(f"Unknown receiver '{receiver}' (expected 'bob' or 'eve')")

    def instantaneous_snr(self, receiver: str) -> torch.Tensor:
        h = torch.as_tensor(self.fading_for(receiver))
        return self.P * h.abs() ** 2 / self.N


@dataclass
class SymbolBlock:
    """Complex symbols [B, M]; mask marks occupied (non-pad) symbols.

    A normalized block has unit mean power over its occupied symbols only.
    Pad slots carry zeros and are not transmitted, so when a batch has padding
    the mean over all B*M symbols is below 1. mean_power() honours the mask.
    """

    symbols: torch.Tensor
    normalized: bool = False
    mask: Optional[torch.Tensor] = None

    def __post_init__(self):
        if not torch.is_complex(self.symbols) or self.symbols.dim() != 2:
            raise ContractViolationError(f"SymbolBlock needs a complex [B, M] tensor, got {self.symbols.dtype}")
        if self.mask is not None and self.mask.shape != self.symbols.shape:
            raise ContractViolationError(
                f"mask shape {tuple(self.mask.shape)} does not match symbols {tuple(self.symbols.shape)}"
            )

    @property
    def shape(self):
        return self.symbols.shape

    def mean_power(self) -> torch.Tensor:
        power = self.symbols.abs() ** 2
        if self.mask is None:
            return power.mean()
        return power[self.mask].mean()


def path_loss_mu(carrier_hz: float) -> float:
    """Reference-distance power gain (c / (4 pi f_c))^2."""
    if carrier_hz <= 0:
        raise ConfigurationError(f"carrier frequency must be positive, got {carrier_hz}")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * carrier_hz)) ** 2


def noise_power(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power in watts; -174 dBm/Hz + 10 log10(B) + N_f."""
    if bandwidth_hz <= 0:
        raise ConfigurationError(f"bandwidth must be positive, got {bandwidth_hz}")
    noise_dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** (noise_dbm / 10.0) / 1000.0


def power_for_target_snr(gamma_T: float, d_B: float, mu: float, N: float) -> float:
    """Transmit power giving average SNR gamma_T = mu d_B^-2 P / N at Bob."""
    return gamma_T * N / (mu * d_B ** -2)


def sample_fading(d: float, mu: float, rng: torch.Generator, size: Optional[int] = None) -> Fading:
    """h = sqrt(mu d^-2) X with X ~ CN(0, 1).

    Args:
        d: Link distance in meters
        mu: Path-loss gain at the reference distance
        rng: Random stream
        size: Number of independent blocks; None returns a Python complex

    Returns:
        One coefficient, or a complex128 tensor of `size` coefficients
    """
    if d <= 0:
        raise ConfigurationError(f"distance must be positive, got {d}")
    n = 1 if size is None else int(size)
    parts = torch.randn(n, 2, generator=rng, dtype=torch.float64) / math.sqrt(2.0)
    h = math.sqrt(mu * d ** -2) * torch.view_as_complex(parts)
    return complex(h[0].item()) if size is None else h


def to_complex(values: torch.Tensor) -> torch.Tensor:
    """[B, L, N] reals -> [B, L*N/2] complex, consecutive pairs forming one symbol."""
    B, L, N = values.shape
    if N % 2:
        raise ContractViolationError(f"symbol dimension N must be even, got {N}")
    return torch.view_as_complex(values.reshape(B, L, N // 2, 2).contiguous()).reshape(B, L * N // 2)


def to_real(symbols: torch.Tensor, L: int) -> torch.Tensor:
    """Inverse of to_complex."""
    B, M = symbols.shape
    if M % L:
        raise ContractViolationError(f"{M} symbols cannot be split over {L} token slots")
    return torch.view_as_real(symbols.reshape(B, L, M // L).contiguous()).reshape(B, L, 2 * M // L)


def symbol_mask(token_mask: torch.Tensor, symbols_per_token: int) -> torch.Tensor:
    """Expand a [B, L] occupied-token mask to the [B, L*K] symbol layout."""
    return token_mask.repeat_interleave(symbols_per_token, dim=1)


def _symbol_energy(symbols: torch.Tensor) -> torch.Tensor:
    # re^2 + im^2 keeps the gradient defined at zeroed pad symbols
    return torch.view_as_real(symbols).pow(2).sum(dim=-1)


def normalize_power(values: torch.Tensor, token_mask: Optional[torch.Tensor] = None) -> SymbolBlock:
    """Pair reals to complex and scale the batch to unit mean symbol power.

    Pad slots (token_mask False) are zeroed and excluded from the mean.
    """
    symbols = to_complex(values)
    mask = None
    if token_mask is not None:
        mask = symbol_mask(token_mask.bool(), symbols.shape[1] // values.shape[1])
        symbols = symbols * mask.to(values.dtype)
        power = _symbol_energy(symbols).sum() / mask.sum().clamp(min=1)
    else:
        power = _symbol_energy(symbols).mean()
    return SymbolBlock(symbols / torch.sqrt(power), normalized=True, mask=mask)


def _as_fading_tensor(h: Fading, like: torch.Tensor) -> torch.Tensor:
    h = torch.as_tensor(h, dtype=like.dtype, device=like.device)
    if h.dim() == 1:
        h = h.reshape(-1, 1)
    return h


def transmit(x: SymbolBlock, h: Fading, P: float, N: float, rng: torch.Generator) -> SymbolBlock:
    """y = sqrt(P) h x + w with w ~ CN(0, N) per complex symbol.

    Args:
        x: Normalized transmit block
        h: Fading coefficient, or one per batch row
        P: Transmit power in watts
        N: Noise power in watts (0 gives a noiseless channel)
        rng: Noise stream

    Returns:
        Received block (not normalized)
    """
    if not x.normalized:
        raise ContractViolationError("transmit() requires a power-normalized SymbolBlock")
    if P <= 0 or N < 0:
        raise ContractViolationError(f"transmit() needs P > 0 and N >= 0 (P={P}, N={N})")

    symbols = x.symbols
    gain = math.sqrt(P) * _as_fading_tensor(h, symbols)
    real_dtype = symbols.real.dtype
    noise_parts = torch.randn(*symbols.shape, 2, generator=rng, dtype=real_dtype)
    noise = math.sqrt(N / 2.0) * torch.view_as_complex(noise_parts).to(symbols.device)
    return SymbolBlock(gain * symbols + noise, normalized=False, mask=x.mask)


def equalize(y: SymbolBlock, h: Fading, P: float) -> SymbolBlock:
    """Coherent equalization y / (sqrt(P) h) with perfect CSI."""
    h_tensor = _as_fading_tensor(h, y.symbols)
    if (h_tensor.abs() < MIN_FADING_MAGNITUDE).any():
        raise DegenerateChannelError(f"|h| below {MIN_FADING_MAGNITUDE}; cannot equalize")
    return SymbolBlock(y.symbols / (math.sqrt(P) * h_tensor), normalized=False, mask=y.mask)


class WiretapChannel:
    """Draws per-block realizations for Bob and Eve from independent streams."""

    def __init__(self, config: ChannelConfig, seed: int):
        """Initialize the channel.

        Args:
            config: Channel geometry and radio parameters
            seed: Master seed; SNR, Bob and Eve streams are spawned from it
        """
        self.config = config
        self.mu = config.mu
        self.noise = config.noise_watts
        states = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(int(seed)).spawn(3)]
        self.snr_rng = torch.Generator().manual_seed(states[0])
        self.bob_rng = torch.Generator().manual_seed(states[1])
        self.eve_rng = torch.Generator().manual_seed(states[2])

    def rng_for(self, receiver: str) -> torch.Generator:
        if receiver == "bob":
            return self.bob_rng
        if receiver == "eve":
            return self.eve_rng
        raise ContractViolationError(f"Unknown receiver '{receiver}'")

    def draw_snr_db(self, low_db: float, high_db: float) -> float:
        """Uniform draw in dB from [low_db, high_db]."""
        u = torch.rand(1, generator=self.snr_rng, dtype=torch.float64).item()
        return low_db + (high_db - low_db) * u

    def transmit_power(self, snr_db: float) -> float:
        return power_for_target_snr(snr_db_to_linear(snr_db), self.config.d_bob_m, self.mu, self.noise)

    def draw_realization(self, snr_db: float, n_blocks: Optional[int] = None) -> ChannelRealization:
        """Draw (h_B, h_E) for one block, or n_blocks independent blocks."""
        return ChannelRealization(
            h_B=sample_fading(self.config.d_bob_m, self.mu, self.bob_rng, n_blocks),
            h_E=sample_fading(self.config.d_eve_m, self.mu, self.eve_rng, n_blocks),
            P=self.transmit_power(snr_db),
            N=self.noise,
            snr_db=snr_db,
        )


def ergodic_secrecy_capacity(config: ChannelConfig, snr_db: float, draws: int = 100_000, seed: int = 0) -> float:
    """Monte-Carlo E[[log2(1 + SNR_B) - log2(1 + SNR_E)]^+] in bits/s/Hz.

    Gaussian-input reference for the learned secrecy proxy; SNR_B has mean
    gamma_T and SNR_E is scaled by (d_B / d_E)^2.
    """
    rng = np.random.default_rng(seed)
    gamma = snr_db_to_linear(snr_db)
    gain_b = rng.exponential(1.0, draws)
    gain_e = rng.exponential(1.0, draws)
    snr_b = gamma * gain_b
    snr_e = gamma * (config.d_bob_m / config.d_eve_m) ** 2 * gain_e
    return float(np.mean(np.maximum(np.log2(1.0 + snr_b) - np.log2(1.0 + snr_e), 0.0)))
