from typing import Any, Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class VAEArchitecture(BaseModel):
    """Desk-scale convolutional VAE shape; one stride-2 stage per entry of encoder_channels."""

    model_config = ConfigDict(frozen=True)

    in_channels: int = Field(default=3)
    encoder_channels: Tuple[int, ...] = Field(default=(32, 64, 128))
    latent_channels: int = Field(default=4, ge=1)

    @field_validator("encoder_channels")
    @classmethod
    def validate_channels(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        """At least one stage, every width positive."""
        if not v or min(v) < 1:
            raise ValueError("encoder_channels needs at least one positive width")
        return v

    @property
    def downsampling_factor(self) -> int:
        """Total spatial reduction of the encoder."""
        return 2 ** len(self.encoder_channels)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready representation, including the derived factor."""
        data = self.model_dump(mode="json")
        data["downsampling_factor"] = self.downsampling_factor
        return data
