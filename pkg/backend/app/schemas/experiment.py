"""
Flat experiment configuration: the schema of TOML config files and of the CLI flags.
Every default is the full-scale fine-tuning setting; toy runs override them from TOML.
"""

from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.attack import AttackBudget
from app.schemas.data import DatasetSpec
from app.schemas.model import VAEArchitecture
from app.schemas.training import PretrainConfig, TrainConfig
from app.utils.validators import parse_fraction

PIXEL_UNIT_FIELDS = ("epsilon", "step_size", "surface_radius", "noise_sigma")


class ExperimentConfig(BaseModel):
    """Every configurable key of the laboratory, one flat namespace."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # ----- data -----
    data_root: str = Field(default="data/toy", description="Corpus directory")
    resolution: int = Field(default=32, ge=8, description="Square target resolution")
    train_fraction: float = Field(default=0.9)
    val_fraction: float = Field(default=0.1)
    split_seed: int = Field(default=0)
    channels: int = Field(default=3)
    num_workers: int = Field(default=4, ge=1)

    # ----- model -----
    encoder_channels: Tuple[int, ...] = Field(default=(32, 64, 128))
    latent_channels: int = Field(default=4, ge=1)
    model_seed: int = Field(default=0)
    extractor_seed: int = Field(default=0)
    extractor_weights: Optional[str] = Field(default=None, description="safetensors file for a pretrained extractor")

    # ----- pretraining -----
    pretrain_steps: int = Field(default=2000, ge=1)
    pretrain_learning_rate: float = Field(default=1e-3, gt=0.0)
    kl_weight: float = Field(default=1e-6, ge=0.0)
    reconstruction: Literal["l2", "l1"] = Field(default="l2")

    # ----- SRL fine-tuning -----
    total_steps: int = Field(default=5000, ge=1)
    batch_size: int = Field(default=20, ge=1)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    orig_weight: float = Field(default=0.01, ge=0.0)
    lpips_weight: float = Field(default=1.0, ge=0.0)
    freeze_decoder: bool = Field(default=True)
    seed: int = Field(default=0)
    checkpoint_every: int = Field(default=1000, ge=1)

    # ----- attack -----
    epsilon: float = Field(default=8 / 255)
    step_size: float = Field(default=0.02)
    iterations: int = Field(default=10, ge=0)
    attack_init: Literal["zero", "uniform"] = Field(default="zero")
    attack_latent: Literal["mean", "sample"] = Field(default="mean")
    attack_seed: int = Field(default=0)

    # ----- evaluation and analysis -----
    eval_split: Literal["train", "val"] = Field(default="val")
    eval_batch_size: int = Field(default=64, ge=1)
    probe_limit: Optional[int] = Field(default=None, ge=1)
    surface_radius: float = Field(default=8 / 255, gt=0.0)
    half_res: int = Field(default=10, ge=2)
    anchors: int = Field(default=16, ge=1)
    pca_components: int = Field(default=2, ge=1)
    noise_sigma: float = Field(default=8 / 255, gt=0.0)

    @field_validator(*PIXEL_UNIT_FIELDS, mode="before")
    @classmethod
    def parse_pixel_units(cls, v: Any) -> float:
        """Accept "8/255" style fractions."""
        return parse_fraction(v)

    # =============================================================================
    # Builders
    # =============================================================================

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(
            root=Path(self.data_root),
            resolution=(self.resolution, self.resolution),
            train_fraction=self.train_fraction,
            val_fraction=self.val_fraction,
            split_seed=self.split_seed,
            channels=self.channels,
            num_workers=self.num_workers,
        )

    def architecture(self) -> VAEArchitecture:
        return VAEArchitecture(
            in_channels=self.channels,
            encoder_channels=self.encoder_channels,
            latent_channels=self.latent_channels,
        )

    def attack_budget(self, **overrides: Any) -> AttackBudget:
        values = dict(
            epsilon=self.epsilon,
            step_size=self.step_size,
            iterations=self.iterations,
            init=self.attack_init,
            rng_seed=self.attack_seed,
            latent_mode=self.attack_latent,
        )
        values.update(overrides)
        return AttackBudget(**values)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            total_steps=self.total_steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            orig_weight=self.orig_weight,
            lpips_weight=self.lpips_weight,
            attack=self.attack_budget(),
            freeze_decoder=self.freeze_decoder,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
        )

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(
            total_steps=self.pretrain_steps,
            batch_size=self.batch_size,
            learning_rate=self.pretrain_learning_rate,
            lpips_weight=self.lpips_weight,
            kl_weight=self.kl_weight,
            reconstruction=self.reconstruction,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
        )

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready resolved configuration."""
        return self.model_dump(mode="json")
