from typing import Any, Dict, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.utils.validators import parse_fraction


class AttackBudget(BaseModel):
    """
    The l-inf ball and the PGD schedule of an attack.

    Attributes:
        epsilon: Radius in pixel units, strictly inside (0, 1).
        step_size: Signed-gradient step per iteration.
        iterations: Number of PGD steps (0 is an exact no-op).
        init: Starting perturbation, zero or uniform inside the ball.
        rng_seed: Seed for the uniform init and for sampled latents.
        latent_mode: Encode with the latent mean or a seeded reparameterized sample.
    """

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=8 / 255, gt=0.0, lt=1.0)
    step_size: float = Field(default=0.02, gt=0.0)
    iterations: int = Field(default=10, ge=0)
    init: Literal["zero", "uniform"] = Field(default="zero")
    rng_seed: int = Field(default=0)
    latent_mode: Literal["mean", "sample"] = Field(default="mean")

    @field_validator("epsilon", "step_size", mode="before")
    @classmethod
    def parse_pixel_units(cls, v: Any) -> float:
        """Accept "8/255" style fractions."""
        return parse_fraction(v)

    def describe(self) -> Dict[str, Any]:
        """Descriptor used in reports and manifests."""
        return self.model_dump(mode="json")
