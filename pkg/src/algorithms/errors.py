"""
Exception hierarchy for the block-independence test package.
Every error is a ValueError so callers can keep a single except clause.
"""

from typing import Optional


class BiltError(ValueError):
    """Base class for every error raised by this package."""


class DomainError(BiltError):
    """Argument outside the domain of a special function."""


class SingularBlockCovariance(BiltError):
    """The pooled covariance of a block could not be factorized."""

    def __init__(self, message: str, block_index: Optional[int] = None):
        if block_index is not None:
            message = f"block {block_index}: {message}"
        super().__init__(message)
        self.block_index = block_index


class DimensionTooLarge(BiltError):
    """p exceeds N - 2, so the full pooled covariance is singular."""


class InsufficientSampleSize(BiltError):
    """N is too small for the largest block."""


class LagTooLarge(BiltError):
    """Requested lag covariance has no terms."""


class NotPositiveDefinite(BiltError):
    """A covariance matrix failed Cholesky factorization."""


class ShapeMismatch(BiltError):
    """Inputs disagree on their dimensions."""


class InvalidConfig(BiltError):
    """A configuration field is missing or out of range."""

    def __init__(self, message: str, field_path: str = ""):
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)
        self.field_path = field_path


class ReplicationFailed(BiltError):
    """A Monte Carlo replication raised."""

    def __init__(self, message: str, rep_index: int):
        super().__init__(f"replication {rep_index}: {message}")
        self.rep_index = rep_index
