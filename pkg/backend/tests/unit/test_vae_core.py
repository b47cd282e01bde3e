"""
Tests for the VAE networks, the functional operations and the loss primitives.
"""

import math

import numpy as np
import pytest
import torch
from safetensors.torch import save_file
from scipy import integrate, stats

from app.core.exceptions import CheckpointError, ConfigurationError, ShapeError
from app.models.image_batch import ImageBatch
from app.models.latent import LOG_VAR_MAX, LatentDist
from app.services.vae import (
    PerceptualExtractor,
    build_model,
    decode,
    encode,
    kl_loss,
    l1_loss,
    mse_loss,
    perceptual_loss,
    reconstruct,
    reconstruction_loss,
    sample_latent,
)


# =============================================================================
# Encode / decode
# =============================================================================

def test_encode_produces_latent_at_one_eighth_resolution(tiny_model, batch):
    dist = encode(tiny_model, batch)

    assert dist.shape == (4, 4, 4, 4)
    assert dist.log_var.shape == dist.mu.shape


def test_encode_rejects_non_divisible_images(tiny_model):
    images = ImageBatch(torch.rand(1, 3, 36, 36), ("odd",))

    with pytest.raises(ShapeError, match="not divisible"):
        encode(tiny_model, images)


def test_decode_is_bounded_to_pixel_domain(tiny_model):
    z = torch.randn(2, 4, 4, 4) * 10

    with torch.no_grad():
        images = decode(tiny_model, z)

    assert images.shape == (2, 3, 32, 32)
    assert float(images.min()) >= 0.0
    assert float(images.max()) <= 1.0


def test_decode_rejects_wrong_latent_channels(tiny_model):
    with pytest.raises(ShapeError):
        decode(tiny_model, torch.zeros(1, 3, 4, 4))


def test_reconstruct_decodes_the_latent_mean(tiny_model, batch):
    with torch.no_grad():
        expected = decode(tiny_model, encode(tiny_model, batch).mu)
        actual = reconstruct(tiny_model, batch)

    assert torch.equal(actual, expected)


def test_encoding_is_independent_of_batch_companions(tiny_model, batch):
    with torch.no_grad():
        together = encode(tiny_model, batch).mu[1]
        alone = encode(tiny_model, batch.select([1])).mu[0]

    assert torch.allclose(together, alone, atol=1e-6)


def test_log_var_is_clamped():
    dist = LatentDist(torch.zeros(1, 1, 2, 2), torch.full((1, 1, 2, 2), 100.0))

    assert float(dist.log_var.max()) == LOG_VAR_MAX


def test_sample_latent_is_seeded():
    dist = LatentDist(torch.zeros(2, 4, 4, 4), torch.zeros(2, 4, 4, 4))

    assert torch.equal(sample_latent(dist, 5), sample_latent(dist, 5))
    assert not torch.equal(sample_latent(dist, 5), sample_latent(dist, 6))


def test_sample_latent_averages_to_the_mean():
    mu = torch.tensor([0.7, -1.3], dtype=torch.float64).reshape(1, 2, 1, 1)
    sigma = torch.tensor([0.5, 2.0], dtype=torch.float64).reshape(1, 2, 1, 1)
    dist = LatentDist(mu, torch.log(sigma ** 2))

    samples = torch.stack([sample_latent(dist, seed) for seed in range(10_000)])
    mean = samples.mean(dim=0)

    assert bool(((mean - mu).abs() <= 3 * sigma / 100).all())


def test_sample_latent_with_tiny_variance_returns_mean():
    mu = torch.randn(1, 4, 2, 2)
    dist = LatentDist(mu, torch.full((1, 4, 2, 2), -30.0))

    assert torch.allclose(sample_latent(dist, 0), mu, atol=1e-5)


# =============================================================================
# ModelHandle
# =============================================================================

def test_build_model_is_deterministic(tiny_architecture):
    first = build_model(tiny_architecture, seed=3)
    second = build_model(tiny_architecture, seed=3)
    other = build_model(tiny_architecture, seed=4)

    assert first.parameter_hash("encoder") == second.parameter_hash("encoder")
    assert first.parameter_hash("decoder") == second.parameter_hash("decoder")
    assert first.parameter_hash("encoder") != other.parameter_hash("encoder")


def test_build_model_leaves_global_rng_alone(tiny_architecture):
    state = torch.get_rng_state()

    build_model(tiny_architecture, seed=11)

    assert torch.equal(torch.get_rng_state(), state)


def test_snapshot_reference_keeps_existing_copy(tiny_model):
    tiny_model.snapshot_reference()
    original = tiny_model.parameter_hash("reference_encoder")
    with torch.no_grad():
        next(tiny_model.encoder.parameters()).add_(1.0)

    tiny_model.snapshot_reference()
    assert tiny_model.parameter_hash("reference_encoder") == original

    tiny_model.snapshot_reference(overwrite=True)
    assert tiny_model.parameter_hash("reference_encoder") == tiny_model.parameter_hash("encoder")


def test_reference_encoder_is_locked(tiny_model):
    reference = tiny_model.snapshot_reference()

    assert all(not p.requires_grad for p in reference.parameters())


def test_missing_reference_is_a_configuration_error(tiny_model):
    with pytest.raises(ConfigurationError):
        tiny_model.require_reference()


def test_freeze_stops_gradients(tiny_model):
    tiny_model.freeze("decoder")

    assert tiny_model.frozen["decoder"]
    assert all(not p.requires_grad for p in tiny_model.decoder.parameters())

    tiny_model.unfreeze("decoder")
    assert all(p.requires_grad for p in tiny_model.decoder.parameters())


def test_unknown_component_is_rejected(tiny_model):
    with pytest.raises(ConfigurationError):
        tiny_model.freeze("reference_encoder")


def test_clone_is_independent(tiny_model):
    copy = tiny_model.clone()
    with torch.no_grad():
        next(copy.encoder.parameters()).add_(1.0)

    assert copy.parameter_hash("encoder") != tiny_model.parameter_hash("encoder")
    assert copy.parameter_hash("decoder") == tiny_model.parameter_hash("decoder")


# =============================================================================
# Loss primitives
# =============================================================================

def test_mse_loss_known_value():
    a = torch.zeros(2, 3, 8, 8)
    b = torch.full((2, 3, 8, 8), 0.5)

    assert float(mse_loss(a, b)) == pytest.approx(0.25)
    assert mse_loss(a, b, reduction="none").shape == (2,)


def test_l1_reconstruction_switch():
    a = torch.zeros(1, 3, 8, 8)
    b = torch.full((1, 3, 8, 8), 0.5)

    assert float(reconstruction_loss(a, b, "l1")) == pytest.approx(0.5)
    assert float(reconstruction_loss(a, b, "l2")) == pytest.approx(0.25)
    assert float(l1_loss(a, b)) == pytest.approx(0.5)


def test_mse_loss_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        mse_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 16, 16))


def test_kl_is_zero_for_standard_normal():
    dist = LatentDist(torch.zeros(2, 4, 2, 2), torch.zeros(2, 4, 2, 2))

    assert float(kl_loss(dist)) == 0.0


def test_kl_known_value():
    dist = LatentDist(torch.ones(2, 1, 2, 2), torch.zeros(2, 1, 2, 2))

    # 0.5 * mu^2 summed over 4 elements
    assert float(kl_loss(dist)) == pytest.approx(2.0)
    assert kl_loss(dist, reduction="none").tolist() == pytest.approx([2.0, 2.0])


def test_kl_matches_numerical_integration():
    mean, variance = 0.8, 0.3
    dist = LatentDist(
        torch.full((1, 1, 1, 1), mean, dtype=torch.float64),
        torch.full((1, 1, 1, 1), math.log(variance), dtype=torch.float64),
    )
    q = stats.norm(mean, math.sqrt(variance))
    p = stats.norm(0.0, 1.0)

    expected, _ = integrate.quad(lambda z: q.pdf(z) * (q.logpdf(z) - p.logpdf(z)), -np.inf, np.inf)

    assert float(kl_loss(dist)) == pytest.approx(expected, abs=1e-4)


def test_perceptual_loss_is_zero_for_identical_images(extractor, batch):
    assert float(perceptual_loss(extractor, batch.pixels, batch.pixels)) == 0.0


def test_perceptual_loss_is_positive_for_different_images(extractor, batch):
    values = perceptual_loss(extractor, batch.pixels, batch.rolled(1).pixels, reduction="none")

    assert values.shape == (4,)
    assert bool((values > 0).all())


# =============================================================================
# Perceptual extractor
# =============================================================================

def test_extractor_is_seeded_and_frozen():
    first = PerceptualExtractor(seed=0)
    second = PerceptualExtractor(seed=0)

    for (name, a), (_, b) in zip(first.state_dict().items(), second.state_dict().items()):
        assert torch.equal(a, b), name
    assert all(not p.requires_grad for p in first.parameters())
    first.train()
    assert not first.training


def test_extractor_pooled_features(extractor, batch):
    with torch.no_grad():
        features = extractor.pooled(batch.pixels)

    assert features.shape == (4, sum(PerceptualExtractor.WIDTHS))


def test_extractor_loads_pretrained_weights(tmp_path):
    source = PerceptualExtractor(seed=9)
    path = tmp_path / "extractor.safetensors"
    save_file({k: v.contiguous() for k, v in source.state_dict().items()}, str(path))

    loaded = PerceptualExtractor.from_file(str(path))

    assert loaded.weight_source == "pretrained"
    assert torch.equal(loaded.stages[0][0].weight, source.stages[0][0].weight)


def test_extractor_rejects_missing_or_mismatched_weights(tmp_path):
    with pytest.raises(CheckpointError):
        PerceptualExtractor.from_file(str(tmp_path / "missing.safetensors"))

    path = tmp_path / "wrong.safetensors"
    save_file({"unexpected": torch.zeros(2)}, str(path))
    with pytest.raises(CheckpointError):
        PerceptualExtractor.from_file(str(path))
