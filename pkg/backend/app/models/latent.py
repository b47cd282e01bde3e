"""
Diagonal Gaussian latent posterior q(z|x) = N(mu, exp(log_var)).
"""

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import torch

from app.core.exceptions import ShapeError

LOG_VAR_MIN = -30.0
LOG_VAR_MAX = 20.0


@dataclass(frozen=True, eq=False)
class LatentDist:
    """Per-image latent mean and log-variance, shape (N, Dz_c, Dz_h, Dz_w)."""

    mu: torch.Tensor
    log_var: torch.Tensor

    def __post_init__(self) -> None:
        if tuple(self.mu.shape) != tuple(self.log_var.shape):
            raise ShapeError(
                f"mu and log_var shapes differ: {tuple(self.mu.shape)} vs {tuple(self.log_var.shape)}",
                details={"mu": list(self.mu.shape), "log_var": list(self.log_var.shape)}
            )
        # clamp is differentiable inside the range, so gradients still reach the encoder
        object.__setattr__(self, "log_var", torch.clamp(self.log_var, LOG_VAR_MIN, LOG_VAR_MAX))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.mu.shape)

    @property
    def std(self) -> torch.Tensor:
        return torch.exp(0.5 * self.log_var)

    def detach(self) -> "LatentDist":
        return LatentDist(self.mu.detach(), self.log_var.detach())

    def flat_mu(self) -> torch.Tensor:
        """Means flattened to (N, D)."""
        return self.mu.reshape(self.mu.shape[0], -1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "shape": list(self.shape),
            "mu_mean": float(self.mu.mean()),
            "log_var_mean": float(self.log_var.mean()),
        }
