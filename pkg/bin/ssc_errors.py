#!/usr/bin/env python3
"""
SSC Lab Errors
Exception hierarchy shared by the corpus, channel, model, training and harness modules.
"""


class SSCError(Exception):
    """Base class for every error raised by SSC Lab."""


class ConfigurationError(SSCError, ValueError):
    """A configuration value is missing, out of range or inconsistent."""


class EmptyCorpusError(SSCError, ValueError):
    """No sentences are left to work with."""


class ContractViolationError(SSCError, ValueError):
    """An operation was called with inputs that break its preconditions."""


class DegenerateChannelError(SSCError, ArithmeticError):
    """The fading coefficient is too small to equalize."""


class TrainingDivergenceError(SSCError, RuntimeError):
    """A training loss became NaN or infinite."""

    def __init__(self, phase: str, step: int, details: dict):
        self.phase = phase
        self.step = step
        self.details = details
        summary = ", ".join(f"{key}={value}" for key, value in details.items())
        super().__init__(f"Non-finite loss in phase '{phase}' at step {step} ({summary})")


class CheckpointError(SSCError, IOError):
    """A checkpoint is missing, corrupt or incompatible with the target config."""
