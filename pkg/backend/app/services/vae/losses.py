"""
Loss primitives. Every loss takes reduction="mean" (a scalar) or
reduction="none" (one value per sample), the latter being what attacks
optimize so that per-image traces can be reported.
"""

from typing import Literal

import torch

from app.models.latent import LatentDist
from app.services.vae.perceptual import PerceptualExtractor
from app.utils.validators import require_same_shape

Reduction = Literal["mean", "none"]

NORMALIZE_EPS = 1e-10


def _reduce(per_sample: torch.Tensor, reduction: Reduction) -> torch.Tensor:
    return per_sample.mean() if reduction == "mean" else per_sample


def mse_loss(a: torch.Tensor, b: torch.Tensor, reduction: Reduction = "mean") -> torch.Tensor:
    """Mean squared elementwise difference (per sample with reduction="none")."""
    require_same_shape(a, b, "mse_loss inputs")
    squared = (a - b) ** 2
    if reduction == "mean":
        return squared.mean()
    return squared.flatten(1).mean(dim=1)


def l1_loss(a: torch.Tensor, b: torch.Tensor, reduction: Reduction = "mean") -> torch.Tensor:
    """Mean absolute elementwise difference."""
    require_same_shape(a, b, "l1_loss inputs")
    absolute = (a - b).abs()
    if reduction == "mean":
        return absolute.mean()
    return absolute.flatten(1).mean(dim=1)


def reconstruction_loss(
    a: torch.Tensor,
    b: torch.Tensor,
    kind: Literal["l2", "l1"] = "l2",
    reduction: Reduction = "mean",
) -> torch.Tensor:
    """Pixel-wise reconstruction loss; L2 by default, L1 as a switch."""
    if kind == "l1":
        return l1_loss(a, b, reduction)
    return mse_loss(a, b, reduction)


def _unit_normalize(features: torch.Tensor) -> torch.Tensor:
    norm = torch.sqrt((features ** 2).sum(dim=1, keepdim=True))
    return features / (norm + NORMALIZE_EPS)


def perceptual_loss(
    extractor: PerceptualExtractor,
    a: torch.Tensor,
    b: torch.Tensor,
    reduction: Reduction = "mean",
) -> torch.Tensor:
    """
    LPIPS-style distance: features are unit-normalized along channels at every
    scale, the squared difference is summed over channels and averaged over
    positions, and the scales are summed.
    """
    require_same_shape(a, b, "perceptual_loss inputs")
    total = None
    for fa, fb in zip(extractor(a), extractor(b)):
        diff = (_unit_normalize(fa) - _unit_normalize(fb)) ** 2
        per_scale = diff.sum(dim=1).flatten(1).mean(dim=1)
        total = per_scale if total is None else total + per_scale
    return _reduce(total, reduction)


def kl_loss(dist: LatentDist, reduction: Reduction = "mean") -> torch.Tensor:
    """KL(q(z|x) || N(0, I)) = 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2), per sample."""
    mu, log_var = dist.mu, dist.log_var
    per_element = 0.5 * (mu ** 2 + torch.exp(log_var) - 1.0 - log_var)
    per_sample = per_element.flatten(1).sum(dim=1).clamp_min(0.0)
    return _reduce(per_sample, reduction)
