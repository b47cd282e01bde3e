"""
Cluster tightness: how far Gaussian input noise moves latent means,
relative to how far apart the latents of different images are.
"""

import logging
import math

import torch

from app.core.exceptions import ConfigurationError, MetricError
from app.models.analysis import ClusterTightness
from app.models.image_batch import ImageBatch
from app.services.vae.model import ModelHandle
from app.services.vae.operations import encode


logger = logging.getLogger(__name__)


def cluster_tightness(
    model: ModelHandle,
    x: ImageBatch,
    noise_sigma: float,
    seed: int,
    batch_size: int = 64,
) -> ClusterTightness:
    """
    mean ||E(x).mu - E(clip(x + eta)).mu|| divided by the mean pairwise
    distance between the clean latent means of distinct images.

    Raises:
        ConfigurationError: If noise_sigma is not positive.
        MetricError: With fewer than two images or a zero pairwise spread.
    """
    if noise_sigma <= 0:
        raise ConfigurationError(f"noise_sigma must be positive, got {noise_sigma}", details={"noise_sigma": noise_sigma})
    if x.size < 2:
        raise MetricError("cluster_tightness needs at least 2 images for a pairwise spread", details={"images": x.size})

    generator = torch.Generator().manual_seed(seed)
    eta = torch.randn(x.shape, generator=generator, dtype=x.pixels.dtype).to(x.pixels.device) * noise_sigma
    noisy = x.with_pixels((x.pixels + eta).clamp(0.0, 1.0))

    clean_mu, noisy_mu = [], []
    with torch.no_grad():
        for clean_chunk, noisy_chunk in zip(x.chunks(batch_size), noisy.chunks(batch_size)):
            clean_mu.append(encode(model, clean_chunk).flat_mu().to(torch.float64))
            noisy_mu.append(encode(model, noisy_chunk).flat_mu().to(torch.float64))
    clean_mu = torch.cat(clean_mu)
    noisy_mu = torch.cat(noisy_mu)

    displacements = torch.linalg.vector_norm(clean_mu - noisy_mu, dim=1).tolist()
    pairwise = torch.pdist(clean_mu).tolist()
    mean_pair_dist = math.fsum(displacements) / len(displacements)
    baseline_spread = math.fsum(pairwise) / len(pairwise)
    if baseline_spread == 0.0:
        raise MetricError("All latent means coincide; the pairwise spread is zero")

    result = ClusterTightness(
        mean_pair_dist=mean_pair_dist,
        baseline_spread=baseline_spread,
        tightness_ratio=mean_pair_dist / baseline_spread,
        noise_sigma=noise_sigma,
        seed=seed,
    )
    logger.info(
        f"Cluster tightness | n={x.size} | sigma={noise_sigma:.5f} | pair_dist={mean_pair_dist:.6g} | "
        f"spread={baseline_spread:.6g} | ratio={result.tightness_ratio:.4f}"
    )
    return result
