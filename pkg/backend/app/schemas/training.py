import math
from typing import ClassVar, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.attack import AttackBudget


class TrainConfig(BaseModel):
    """Configuration of the SRL min-max encoder fine-tune."""

    model_config = ConfigDict(frozen=True)

    total_steps: int = Field(default=5000, ge=1)
    batch_size: int = Field(default=20, ge=1)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    optimizer: Literal["adamw"] = Field(default="adamw")
    weight_decay: float = Field(default=0.01, ge=0.0)
    orig_weight: float = Field(default=0.01, ge=0.0, description="Originality loss weight")
    lpips_weight: float = Field(default=1.0, ge=0.0, description="Perceptual loss weight")
    attack: AttackBudget = Field(default_factory=AttackBudget)
    freeze_decoder: bool = Field(default=True)
    seed: int = Field(default=0)
    checkpoint_every: int = Field(default=1000, ge=1)

    @field_validator("freeze_decoder")
    @classmethod
    def validate_freeze(cls, v: bool) -> bool:
        """The decoder is always frozen during SRL fine-tuning."""
        if not v:
            raise ValueError("freeze_decoder must be true for SRL fine-tuning")
        return v

    @property
    def is_ablation(self) -> bool:
        """True when the originality term is switched off."""
        return self.orig_weight == 0.0

    @property
    def run_tag(self) -> str:
        """Tag recorded in manifests."""
        return "wo-originality" if self.is_ablation else "srl"


class PretrainConfig(BaseModel):
    """Configuration of baseline VAE pretraining (reconstruction + perceptual + KL)."""

    model_config = ConfigDict(frozen=True)

    total_steps: int = Field(default=2000, ge=1)
    batch_size: int = Field(default=20, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    lpips_weight: float = Field(default=1.0, ge=0.0)
    kl_weight: float = Field(default=1e-6, ge=0.0)
    reconstruction: Literal["l2", "l1"] = Field(default="l2")
    divergence_factor: float = Field(default=10.0, gt=1.0)
    seed: int = Field(default=0)
    checkpoint_every: int = Field(default=1000, ge=1)


class StepRecord(BaseModel):
    """One SRL fine-tune step; total reconstitutes from its weighted components."""

    model_config = ConfigDict(frozen=True)

    CSV_HEADER: ClassVar[Tuple[str, ...]] = ("step", "total", "orig", "mse_adv", "lpips_adv", "grad_norm", "attack_gain")

    step: int
    total: float
    orig: float
    mse_adv: float
    lpips_adv: float
    grad_norm: float
    attack_gain: float
    orig_weight: float = Field(exclude=True)
    lpips_weight: float = Field(exclude=True)

    @model_validator(mode="after")
    def validate_decomposition(self) -> "StepRecord":
        """total = orig_weight*orig + mse_adv + lpips_weight*lpips_adv (relative 1e-6)."""
        if not math.isfinite(self.total):
            return self
        expected = self.orig_weight * self.orig + self.mse_adv + self.lpips_weight * self.lpips_adv
        if abs(self.total - expected) > 1e-6 * max(1.0, abs(expected)):
            raise ValueError(f"total {self.total} does not reconstitute from components ({expected})")
        return self

    def csv_row(self) -> tuple:
        return tuple(getattr(self, name) for name in self.CSV_HEADER)


class PretrainRecord(BaseModel):
    """One baseline pretraining step."""

    model_config = ConfigDict(frozen=True)

    CSV_HEADER: ClassVar[Tuple[str, ...]] = ("step", "total", "rec", "lpips", "kl", "grad_norm")

    step: int
    total: float
    rec: float
    lpips: float
    kl: float
    grad_norm: float

    def csv_row(self) -> tuple:
        return tuple(getattr(self, name) for name in self.CSV_HEADER)
