"""
Tests for the SRL objective, its ablation and the originality term.
"""

import pytest
import torch

from app.core.exceptions import ConfigurationError
from app.models.latent import LatentDist
from app.schemas.attack import AttackBudget
from app.schemas.training import StepRecord, TrainConfig
from app.services.training import (
    ablation_total_loss,
    craft_adversarial,
    originality_loss,
    srl_objective,
    srl_total_loss,
)
from app.services.vae import encode, encode_reference

FAST = TrainConfig(attack=AttackBudget(iterations=2))


def test_originality_known_value():
    current = LatentDist(torch.ones(2, 1, 2, 2), torch.zeros(2, 1, 2, 2))
    reference = LatentDist(torch.zeros(2, 1, 2, 2), torch.ones(2, 1, 2, 2))

    # 4 elements off by 1 in mu plus 4 off by 1 in log_var, per image
    assert float(originality_loss(current, reference)) == pytest.approx(8.0)


def test_originality_is_exactly_zero_right_after_snapshot(tiny_model, batch):
    tiny_model.snapshot_reference()

    with torch.no_grad():
        value = originality_loss(encode(tiny_model, batch), encode_reference(tiny_model, batch))

    assert float(value) == 0.0


def test_objectives_require_reference(tiny_model, batch, extractor):
    with pytest.raises(ConfigurationError):
        srl_total_loss(tiny_model, batch, FAST, seed=0, extractor=extractor)
    with pytest.raises(ConfigurationError):
        ablation_total_loss(tiny_model, batch, FAST, seed=0, extractor=extractor)


def test_total_reconstitutes_from_components(tiny_model, batch, extractor):
    tiny_model.snapshot_reference()
    with torch.no_grad():
        next(tiny_model.encoder.parameters()).mul_(1.1)

    breakdown = srl_total_loss(tiny_model, batch, FAST, seed=0, extractor=extractor)
    parts = breakdown.components()

    expected = FAST.orig_weight * parts["orig"] + parts["mse_adv"] + FAST.lpips_weight * parts["lpips_adv"]
    assert parts["total"] == pytest.approx(expected, rel=1e-6)
    assert parts["orig"] > 0.0
    StepRecord(step=0, grad_norm=0.0, orig_weight=FAST.orig_weight, lpips_weight=FAST.lpips_weight, **parts)


def test_ablation_equals_srl_loss_at_zero_weight(tiny_model, batch, extractor):
    tiny_model.snapshot_reference()
    with torch.no_grad():
        next(tiny_model.encoder.parameters()).mul_(1.1)
    cfg = FAST.model_copy(update={"orig_weight": 0.0})

    ablation = ablation_total_loss(tiny_model, batch, cfg, seed=0, extractor=extractor)
    weighted = srl_total_loss(tiny_model, batch, cfg, seed=0, extractor=extractor)

    assert float(ablation.orig) == 0.0
    assert float(weighted.orig) > 0.0
    assert torch.equal(ablation.total.detach(), weighted.total.detach())
    assert cfg.is_ablation
    assert cfg.run_tag == "wo-originality"


def _encoder_grads(model, batch, cfg, extractor):
    model.encoder.zero_grad(set_to_none=True)
    ablation_total_loss(model, batch, cfg, seed=0, extractor=extractor).total.backward()
    return [p.grad.clone() for p in model.encoder.parameters()]


def test_ablation_gradient_ignores_the_reference(tiny_model, batch, extractor):
    tiny_model.snapshot_reference()
    tiny_model.freeze("decoder")
    cfg = FAST.model_copy(update={"orig_weight": 0.0})
    before = _encoder_grads(tiny_model, batch, cfg, extractor)

    with torch.no_grad():
        for p in tiny_model.reference_encoder.parameters():
            p.add_(0.5)
    after = _encoder_grads(tiny_model, batch, cfg, extractor)

    assert all(torch.equal(a, b) for a, b in zip(before, after))


def test_gradients_reach_only_the_encoder(tiny_model, batch, extractor):
    tiny_model.snapshot_reference()
    tiny_model.freeze("decoder")

    breakdown = srl_total_loss(tiny_model, batch, FAST, seed=0, extractor=extractor)
    breakdown.total.backward()

    assert all(p.grad is None for p in tiny_model.decoder.parameters())
    assert all(p.grad is None for p in tiny_model.reference_encoder.parameters())
    assert any(p.grad is not None and bool(p.grad.abs().sum() > 0) for p in tiny_model.encoder.parameters())


def test_outer_objective_treats_x_adv_as_constant(tiny_model, batch, extractor):
    tiny_model.snapshot_reference()
    x_adv = batch.pixels.clone().requires_grad_(True)

    breakdown = srl_objective(tiny_model, batch, x_adv, FAST, seed=0, extractor=extractor)
    breakdown.total.backward()

    assert x_adv.grad is None


def test_craft_adversarial_offsets_attack_seed(tiny_model, batch, extractor):
    cfg = TrainConfig(attack=AttackBudget(iterations=1, init="uniform", rng_seed=4))

    first = craft_adversarial(tiny_model, batch, cfg, seed=1, extractor=extractor)
    again = craft_adversarial(tiny_model, batch, cfg, seed=1, extractor=extractor)
    other = craft_adversarial(tiny_model, batch, cfg, seed=2, extractor=extractor)

    assert torch.equal(first.delta, again.delta)
    assert not torch.equal(first.delta, other.delta)


def test_decoder_must_stay_frozen():
    with pytest.raises(ValueError):
        TrainConfig(freeze_decoder=False)


def test_step_record_rejects_inconsistent_total():
    with pytest.raises(ValueError):
        StepRecord(step=0, total=5.0, orig=1.0, mse_adv=1.0, lpips_adv=1.0, grad_norm=0.0,
                   attack_gain=0.0, orig_weight=0.01, lpips_weight=1.0)
