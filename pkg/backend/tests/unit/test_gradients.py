"""
Central finite-difference checks of every loss primitive, in float64.
"""

from typing import Callable

import torch

from app.models.latent import LatentDist
from app.schemas.training import TrainConfig
from app.services.training import originality_loss, srl_objective
from app.services.vae import encode, encode_reference, kl_loss, mse_loss, perceptual_loss

STEP = 1e-6
RELATIVE_TOLERANCE = 1e-2


def assert_matches_finite_difference(loss_fn: Callable[[], torch.Tensor], tensor: torch.Tensor, count: int = 6, seed: int = 0):
    """Compare autograd with (f(t + h) - f(t - h)) / 2h on `count` random entries of `tensor`."""
    (grad,) = torch.autograd.grad(loss_fn(), tensor)
    flat = tensor.data.view(-1)
    generator = torch.Generator().manual_seed(seed)
    for index in torch.randperm(flat.numel(), generator=generator)[:count].tolist():
        original = flat[index].item()
        with torch.no_grad():
            flat[index] = original + STEP
            plus = loss_fn().item()
            flat[index] = original - STEP
            minus = loss_fn().item()
            flat[index] = original
        numeric = (plus - minus) / (2 * STEP)
        analytic = grad.view(-1)[index].item()
        scale = max(abs(numeric), abs(analytic))
        assert abs(analytic - numeric) <= RELATIVE_TOLERANCE * scale + 1e-8, (index, analytic, numeric)


def test_mse_gradient():
    generator = torch.Generator().manual_seed(0)
    a = torch.rand(2, 3, 8, 8, generator=generator, dtype=torch.float64).requires_grad_(True)
    b = torch.rand(2, 3, 8, 8, generator=generator, dtype=torch.float64)

    assert_matches_finite_difference(lambda: mse_loss(a, b), a)


def test_perceptual_gradient(extractor64):
    generator = torch.Generator().manual_seed(1)
    a = torch.rand(2, 3, 16, 16, generator=generator, dtype=torch.float64).requires_grad_(True)
    b = torch.rand(2, 3, 16, 16, generator=generator, dtype=torch.float64)

    assert_matches_finite_difference(lambda: perceptual_loss(extractor64, a, b), a)


def test_kl_gradient():
    generator = torch.Generator().manual_seed(2)
    mu = torch.randn(2, 4, 2, 2, generator=generator, dtype=torch.float64).requires_grad_(True)
    log_var = (torch.randn(2, 4, 2, 2, generator=generator, dtype=torch.float64) * 0.5).requires_grad_(True)

    assert_matches_finite_difference(lambda: kl_loss(LatentDist(mu, log_var)), mu)
    assert_matches_finite_difference(lambda: kl_loss(LatentDist(mu, log_var)), log_var)


def _perturb_encoder(model, scale: float = 0.05, seed: int = 0):
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for parameter in model.encoder.parameters():
            parameter.add_(torch.randn(parameter.shape, generator=generator, dtype=parameter.dtype) * scale)


def test_originality_gradient(tiny_model64, batch64):
    tiny_model64.snapshot_reference()
    _perturb_encoder(tiny_model64)
    weight = tiny_model64.encoder.head.weight

    def loss():
        return originality_loss(encode(tiny_model64, batch64), encode_reference(tiny_model64, batch64))

    assert float(loss()) > 0.0
    assert_matches_finite_difference(loss, weight)


def test_srl_total_gradient(tiny_model64, batch64, extractor64):
    tiny_model64.snapshot_reference()
    tiny_model64.freeze("decoder")
    _perturb_encoder(tiny_model64)
    generator = torch.Generator().manual_seed(4)
    x_adv = (batch64.pixels + (torch.rand(batch64.shape, generator=generator, dtype=torch.float64) - 0.5) * 0.05).clamp(0, 1)
    cfg = TrainConfig()

    def loss():
        return srl_objective(tiny_model64, batch64, x_adv, cfg, seed=3, extractor=extractor64).total

    assert_matches_finite_difference(loss, tiny_model64.encoder.head.weight)
    assert_matches_finite_difference(loss, tiny_model64.encoder.body[0].weight, seed=1)
