"""
Poison-crafting probe: how far can an epsilon-bounded attacker pull the
latents of source images toward the latents of destination images?
"""

import logging

import torch

from app.models.image_batch import ImageBatch
from app.models.outcomes import PoisonProbeReport
from app.schemas.attack import AttackBudget
from app.services.attacks.methods import encoder_targeted_attack
from app.services.vae.model import ModelHandle
from app.services.vae.operations import encode
from app.utils.validators import require_same_shape

logger = logging.getLogger(__name__)


def _ratio(final: float, initial: float) -> float:
    # a source already at its destination cannot be pulled any closer
    return final / initial if initial > 0 else 1.0


def poison_crafting_probe(
    model: ModelHandle,
    x_src: ImageBatch,
    x_dest: ImageBatch,
    budget: AttackBudget,
) -> PoisonProbeReport:
    """
    Run the encoder-targeted attack with z_targ = E(x_dest).mu.

    Gaps are batch means of the squared latent distance before and after the
    attack. reduction_ratio = final_gap / initial_gap (1.0 when the initial
    gap is 0); lower means the encoder is easier to poison.

    Args:
        model: The VAE under attack.
        x_src: Images the attacker perturbs.
        x_dest: Images whose latents the attacker aims for.
        budget: l-inf budget and PGD schedule.

    Returns:
        PoisonProbeReport with batch and per-image ratios.
    """
    require_same_shape(x_src.pixels, x_dest.pixels, "probe source and destination")
    with torch.no_grad():
        z_targ = encode(model, x_dest).mu.detach()

    outcome = encoder_targeted_attack(model, x_src, z_targ, budget)
    initial_gap = float(outcome.initial_losses.mean())
    final_gap = float(outcome.final_losses.mean())
    per_image = [
        _ratio(float(final), float(initial))
        for initial, final in zip(outcome.initial_losses.tolist(), outcome.final_losses.tolist())
    ]

    report = PoisonProbeReport(
        initial_gap=initial_gap,
        final_gap=final_gap,
        reduction_ratio=_ratio(final_gap, initial_gap),
        outcome=outcome,
        per_image_ratios=per_image,
    )
    logger.info(
        f"Poison probe | images={x_src.size} | eps={budget.epsilon:.5f} | initial_gap={initial_gap:.6g} | "
        f"final_gap={final_gap:.6g} | ratio={report.reduction_ratio:.4f}"
    )
    return report
