"""Tensor-carrying domain types."""

from app.models.analysis import ClusterTightness, PCAResult, SurfaceGrid
from app.models.image_batch import ImageBatch
from app.models.latent import LOG_VAR_MAX, LOG_VAR_MIN, LatentDist
from app.models.outcomes import AttackOutcome, PoisonProbeReport

__all__ = [
    "AttackOutcome",
    "ClusterTightness",
    "ImageBatch",
    "LatentDist",
    "LOG_VAR_MAX",
    "LOG_VAR_MIN",
    "PCAResult",
    "PoisonProbeReport",
    "SurfaceGrid",
]
