"""
Attack objectives built on the PGD engine: the reconstruction attack that SRL
trains against, the encoder-targeted attack, and the MIST textural attack.
"""

import logging
from typing import Dict, Literal, Optional

import torch

from app.core.exceptions import ConfigurationError, ShapeError
from app.models.image_batch import ImageBatch
from app.models.outcomes import AttackOutcome
from app.schemas.attack import AttackBudget
from app.services.attacks.pgd import run_pgd
from app.services.vae.losses import mse_loss, perceptual_loss
from app.services.vae.model import ModelHandle
from app.services.vae.operations import decode, encode, sample_latent
from app.services.vae.perceptual import PerceptualExtractor, default_extractor
from app.utils.validators import require_same_shape

logger = logging.getLogger(__name__)

ATTACK_METHODS = ("pgd-recon", "encoder-target", "mist-textural", "poison-probe")

# l-inf radius used when neither a flag nor the config file sets one
DEFAULT_EPSILON: Dict[str, float] = {
    "pgd-recon": 8 / 255,
    "encoder-target": 16 / 255,
    "mist-textural": 8 / 255,
    "poison-probe": 8 / 255,
}

TargetKind = Literal["gray", "roll"]


def attack_latent(model: ModelHandle, pixels: torch.Tensor, budget: AttackBudget, iteration: int) -> torch.Tensor:
    """Latent used inside attack objectives: mu, or a sample seeded by rng_seed + iteration."""
    dist = encode(model, pixels)
    if budget.latent_mode == "sample":
        return sample_latent(dist, budget.rng_seed + iteration)
    return dist.mu


def target_batch(x: ImageBatch, kind: TargetKind) -> ImageBatch:
    """
    Target images for latent-space attacks.

    "gray" is a constant 0.5 image per sample, "roll" pairs every image with
    its neighbour in the batch.
    """
    if kind == "gray":
        return x.with_pixels(torch.full_like(x.pixels, 0.5))
    if kind == "roll":
        return x.rolled(1)
    raise ConfigurationError(f"Unknown attack target: {kind}", details={"target": kind})


def pgd_reconstruction_attack(
    model: ModelHandle,
    x: ImageBatch,
    budget: AttackBudget,
    lambda_lpips: float = 1.0,
    extractor: Optional[PerceptualExtractor] = None,
) -> AttackOutcome:
    """
    Maximize MSE + lambda * perceptual between D(E(x + delta)) and the clean x.

    Args:
        model: The VAE under attack.
        x: Clean batch.
        budget: l-inf budget and PGD schedule.
        lambda_lpips: Weight of the perceptual term.
        extractor: Perceptual feature map; the seeded default when None.

    Returns:
        AttackOutcome tagged "reconstruction".
    """
    x.require_divisible(model.downsampling_factor)
    if extractor is None:
        extractor = default_extractor(x.shape[1], dtype=x.pixels.dtype)
    clean = x.pixels.detach()

    def objective(x_adv: torch.Tensor, iteration: int) -> torch.Tensor:
        recon = decode(model, attack_latent(model, x_adv, budget, iteration))
        per_sample = mse_loss(recon, clean, reduction="none")
        if lambda_lpips:
            per_sample = per_sample + lambda_lpips * perceptual_loss(extractor, recon, clean, reduction="none")
        return per_sample

    return run_pgd(x, objective, budget, direction="ascent", tag="reconstruction")


def encoder_targeted_attack(
    model: ModelHandle,
    x: ImageBatch,
    z_targ: torch.Tensor,
    budget: AttackBudget,
) -> AttackOutcome:
    """
    Minimize the squared latent distance ||E(x + delta) - z_targ||^2 per image.

    Raises:
        ShapeError: If z_targ does not have the encoder's mu shape for x.
    """
    x.require_divisible(model.downsampling_factor)
    f = model.downsampling_factor
    expected = (x.size, model.latent_channels, x.spatial[0] // f, x.spatial[1] // f)
    if tuple(z_targ.shape) != expected:
        raise ShapeError(
            f"Target latent has shape {tuple(z_targ.shape)}, expected {expected}",
            details={"target": list(z_targ.shape), "expected": list(expected)}
        )
    target = z_targ.detach()

    def objective(x_adv: torch.Tensor, iteration: int) -> torch.Tensor:
        latent = attack_latent(model, x_adv, budget, iteration)
        return ((latent - target) ** 2).flatten(1).sum(dim=1)

    return run_pgd(x, objective, budget, direction="descent", tag="encoder_targeted")


def mist_textural_attack(
    model: ModelHandle,
    x: ImageBatch,
    y_target: ImageBatch,
    budget: AttackBudget,
) -> AttackOutcome:
    """
    Maximize the latent distance ||E(y).mu - E(x + delta)||_2 from a target image.

    The norm is taken through a guarded square root: its value is exactly 0
    at coincident latents and its gradient stays finite there.

    Raises:
        ShapeError: If y_target and x differ in shape.
    """
    require_same_shape(x.pixels, y_target.pixels, "attack input and target")
    x.require_divisible(model.downsampling_factor)
    with torch.no_grad():
        target = encode(model, y_target).mu.detach()

    def objective(x_adv: torch.Tensor, iteration: int) -> torch.Tensor:
        latent = attack_latent(model, x_adv, budget, iteration)
        squared = ((latent - target) ** 2).flatten(1).sum(dim=1)
        positive = squared > 0
        safe = torch.where(positive, squared, torch.ones_like(squared))
        return torch.where(positive, torch.sqrt(safe), torch.zeros_like(squared))

    return run_pgd(x, objective, budget, direction="ascent", tag="mist_textural")
