"""
Custom exceptions for the laboratory.
Provides specific error types for different components.
"""

from typing import Optional


class SRLLabError(Exception):
    """Base exception for all laboratory errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationError(SRLLabError):
    """Raised when configuration is invalid or missing."""
    pass


class CheckpointError(ConfigurationError):
    """Raised when a checkpoint is missing, unreadable or does not match the architecture."""
    pass


class DatasetError(SRLLabError):
    """Raised when a corpus cannot be loaded or split."""
    pass


class ShapeError(SRLLabError):
    """Raised when tensor shapes violate a module contract."""
    pass


class AttackError(SRLLabError):
    """Raised when an attack cannot proceed (e.g. non-finite gradient)."""
    pass


class TrainingHaltError(SRLLabError):
    """Raised when training halts on a non-finite or diverging loss."""
    pass


class MetricError(SRLLabError):
    """Raised when a metric is undefined for its inputs."""
    pass


class ArtifactError(SRLLabError):
    """Raised when an artifact cannot be written."""
    pass
