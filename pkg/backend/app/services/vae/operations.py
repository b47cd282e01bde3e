"""
Functional entry points over a ModelHandle: encode, reparameterized sampling, decode.
"""

from typing import Union

import torch

from app.models.image_batch import ImageBatch
from app.models.latent import LatentDist
from app.services.vae.model import ModelHandle
from app.utils.validators import require_divisible

Pixels = Union[ImageBatch, torch.Tensor]


def _pixels(model: ModelHandle, x: Pixels) -> torch.Tensor:
    pixels = x.pixels if isinstance(x, ImageBatch) else x
    require_divisible(tuple(pixels.shape[-2:]), model.downsampling_factor)
    return pixels


def encode(model: ModelHandle, x: Pixels) -> LatentDist:
    """
    q(z|x) under the trainable encoder.

    Args:
        model: The VAE.
        x: ImageBatch, or a raw (N, C, H, W) tensor when gradients must flow
            into the pixels (attacks).

    Returns:
        LatentDist with spatial dims (H/f, W/f); log_var clamped to [-30, 20].

    Raises:
        ShapeError: If H or W is not divisible by the downsampling factor.
    """
    mu, log_var = model.run_encoder(_pixels(model, x))
    return LatentDist(mu, log_var)


def encode_reference(model: ModelHandle, x: Pixels) -> LatentDist:
    """q(z|x) under the frozen reference encoder theta_0."""
    mu, log_var = model.run_encoder(_pixels(model, x), reference=True)
    return LatentDist(mu, log_var)


def sample_latent(dist: LatentDist, seed: int) -> torch.Tensor:
    """
    z = mu + exp(0.5 * log_var) * eta with eta ~ N(0, I) drawn from `seed`.

    The noise comes from a private generator on the CPU, so the same seed
    gives the same z regardless of global RNG state or device.
    """
    generator = torch.Generator().manual_seed(seed)
    eta = torch.randn(dist.shape, generator=generator, dtype=dist.mu.dtype).to(dist.mu.device)
    return dist.mu + dist.std * eta


def decode(model: ModelHandle, z: torch.Tensor) -> torch.Tensor:
    """
    D_phi(z), an image tensor in (0, 1).

    Raises:
        ShapeError: If z does not have the model's latent channel count.
    """
    return model.run_decoder(z)


def reconstruct(model: ModelHandle, x: Pixels) -> torch.Tensor:
    """Deterministic reconstruction D(E(x).mu)."""
    return decode(model, encode(model, x).mu)
