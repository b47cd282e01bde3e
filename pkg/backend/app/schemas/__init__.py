"""Validated value objects shared across the laboratory."""

from app.schemas.attack import AttackBudget
from app.schemas.data import DatasetSpec
from app.schemas.experiment import ExperimentConfig
from app.schemas.manifest import RunManifest
from app.schemas.model import VAEArchitecture
from app.schemas.report import MetricReport, QualityMetrics
from app.schemas.training import PretrainConfig, PretrainRecord, StepRecord, TrainConfig

__all__ = [
    "AttackBudget",
    "DatasetSpec",
    "ExperimentConfig",
    "MetricReport",
    "PretrainConfig",
    "PretrainRecord",
    "QualityMetrics",
    "RunManifest",
    "StepRecord",
    "TrainConfig",
    "VAEArchitecture",
]
