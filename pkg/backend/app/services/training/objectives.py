"""
Training objectives of the SRL min-max fine-tune and of its ablation.

The inner maximization crafts x_adv with the reconstruction attack (gradients
w.r.t. delta only) and hands back detached pixels; the outer minimization
then sees x_adv as a constant, so no second-order term reaches theta.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import torch

from app.models.image_batch import ImageBatch
from app.models.latent import LatentDist
from app.models.outcomes import AttackOutcome
from app.schemas.training import TrainConfig
from app.services.attacks.methods import pgd_reconstruction_attack
from app.services.vae.losses import mse_loss, perceptual_loss
from app.services.vae.model import ModelHandle
from app.services.vae.operations import decode, encode, encode_reference, sample_latent
from app.services.vae.perceptual import PerceptualExtractor, default_extractor
from app.utils.validators import require_same_shape

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    """Differentiable total plus the detached components a StepRecord is built from."""

    total: torch.Tensor
    orig: torch.Tensor
    mse_adv: torch.Tensor
    lpips_adv: torch.Tensor
    attack: Optional[AttackOutcome] = None

    @property
    def attack_gain(self) -> float:
        return self.attack.gain if self.attack is not None else 0.0

    def components(self) -> Dict[str, float]:
        return {
            "total": float(self.total.detach()),
            "orig": float(self.orig.detach()),
            "mse_adv": float(self.mse_adv.detach()),
            "lpips_adv": float(self.lpips_adv.detach()),
            "attack_gain": self.attack_gain,
        }


def originality_loss(current: LatentDist, reference: LatentDist) -> torch.Tensor:
    """
    ||mu - mu_0||^2 + ||log_var - log_var_0||^2 summed per image, averaged over the batch.

    Raises:
        ShapeError: If the two distributions differ in shape.
    """
    require_same_shape(current.mu, reference.mu, "current and reference latents")
    per_sample = (
        ((current.mu - reference.mu) ** 2).flatten(1).sum(dim=1)
        + ((current.log_var - reference.log_var) ** 2).flatten(1).sum(dim=1)
    )
    return per_sample.mean()


def _extractor_for(x: ImageBatch, extractor: Optional[PerceptualExtractor]) -> PerceptualExtractor:
    if extractor is not None:
        return extractor
    return default_extractor(x.shape[1], dtype=x.pixels.dtype)


def craft_adversarial(
    model: ModelHandle,
    x: ImageBatch,
    cfg: TrainConfig,
    seed: int,
    extractor: Optional[PerceptualExtractor] = None,
) -> AttackOutcome:
    """Inner maximization: a fresh reconstruction attack for this step."""
    budget = cfg.attack.model_copy(update={"rng_seed": cfg.attack.rng_seed + seed})
    return pgd_reconstruction_attack(model, x, budget, lambda_lpips=cfg.lpips_weight, extractor=_extractor_for(x, extractor))


def srl_objective(
    model: ModelHandle,
    x: ImageBatch,
    x_adv: torch.Tensor,
    cfg: TrainConfig,
    seed: int,
    extractor: Optional[PerceptualExtractor] = None,
    include_originality: bool = True,
) -> LossBreakdown:
    """
    Outer minimization for a fixed adversarial input.

    The adversarial reconstruction decodes a seeded sample of E(x_adv) and is
    compared with the clean x. The originality term compares the current
    encoder with theta_0 on the clean x.

    Raises:
        ConfigurationError: If the model has no reference encoder.
    """
    model.require_reference()
    extractor = _extractor_for(x, extractor)
    clean = x.pixels
    x_adv = x_adv.detach()

    if include_originality:
        with torch.no_grad():
            reference = encode_reference(model, clean)
        orig = originality_loss(encode(model, clean), reference)
    else:
        orig = torch.zeros((), dtype=clean.dtype, device=clean.device)

    z = sample_latent(encode(model, x_adv), seed)
    recon = decode(model, z)
    mse_adv = mse_loss(recon, clean)
    lpips_adv = perceptual_loss(extractor, recon, clean)

    if include_originality:
        total = cfg.orig_weight * orig + mse_adv + cfg.lpips_weight * lpips_adv
    else:
        total = mse_adv + cfg.lpips_weight * lpips_adv
    return LossBreakdown(total=total, orig=orig.detach(), mse_adv=mse_adv.detach(), lpips_adv=lpips_adv.detach())


def srl_total_loss(
    model: ModelHandle,
    x: ImageBatch,
    cfg: TrainConfig,
    seed: int,
    extractor: Optional[PerceptualExtractor] = None,
) -> LossBreakdown:
    """orig_weight * L_orig + L_MSE(D(E(x_adv)), x) + lpips_weight * L_LPIPS(D(E(x_adv)), x)."""
    model.require_reference()
    outcome = craft_adversarial(model, x, cfg, seed, extractor)
    breakdown = srl_objective(model, x, outcome.x_adv.pixels, cfg, seed, extractor)
    return LossBreakdown(breakdown.total, breakdown.orig, breakdown.mse_adv, breakdown.lpips_adv, outcome)


def ablation_total_loss(
    model: ModelHandle,
    x: ImageBatch,
    cfg: TrainConfig,
    seed: int,
    extractor: Optional[PerceptualExtractor] = None,
) -> LossBreakdown:
    """The SRL loss without the originality term; theta_0 does not enter the graph."""
    model.require_reference()
    outcome = craft_adversarial(model, x, cfg, seed, extractor)
    breakdown = srl_objective(model, x, outcome.x_adv.pixels, cfg, seed, extractor, include_originality=False)
    return LossBreakdown(breakdown.total, breakdown.orig, breakdown.mse_adv, breakdown.lpips_adv, outcome)
