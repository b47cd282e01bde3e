from pathlib import Path
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class DatasetSpec(BaseModel):
    """Where a corpus lives and how it is resized and split."""

    model_config = ConfigDict(frozen=True)

    root: Path = Field(..., description="Directory tree of PNG/JPEG files")
    resolution: Tuple[int, int] = Field(default=(32, 32), description="Target (H, W)")
    train_fraction: float = Field(default=0.9, gt=0.0, le=1.0)
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0, description="0 disables the val split")
    split_seed: int = Field(default=0)
    channels: int = Field(default=3, description="1 (grayscale) or 3 (RGB)")
    num_workers: int = Field(default=4, ge=1, description="Decode threads")

    @field_validator("resolution")
    @classmethod
    def validate_resolution(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        """H and W must be at least 8 pixels."""
        if min(v) < 8:
            raise ValueError("resolution must be at least 8x8")
        return v

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v: int) -> int:
        """Only grayscale and RGB corpora are supported."""
        if v not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        return v

    @model_validator(mode="after")
    def validate_fractions(self) -> "DatasetSpec":
        """Split fractions must sum to one."""
        if abs(self.train_fraction + self.val_fraction - 1.0) > 1e-9:
            raise ValueError("train_fraction + val_fraction must equal 1.0")
        return self
