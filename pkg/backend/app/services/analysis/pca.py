"""
PCA of flattened latent means.
"""

import logging
from typing import Optional, Sequence

import numpy as np
import torch
from sklearn.decomposition import PCA

from app.core.exceptions import MetricError
from app.models.analysis import PCAResult
from app.models.image_batch import ImageBatch
from app.services.vae.model import ModelHandle
from app.services.vae.operations import encode

logger = logging.getLogger(__name__)


def collect_latents(model: ModelHandle, batch: ImageBatch, batch_size: int = 64) -> np.ndarray:
    """(N, D) float64 matrix of flattened latent means, in batch order."""
    rows = []
    with torch.no_grad():
        for chunk in batch.chunks(batch_size):
            rows.append(encode(model, chunk).flat_mu().to(torch.float64).cpu().numpy())
    return np.concatenate(rows, axis=0)


def latent_pca(latents: np.ndarray, k: int, ids: Optional[Sequence[str]] = None) -> PCAResult:
    """
    Top-k principal components of latent vectors.

    Args:
        latents: (N, D) matrix.
        k: Number of components.
        ids: Sample ids of the rows, carried into the projections.

    Returns:
        PCAResult with orthonormal components and non-increasing explained
        variance ratios.

    Raises:
        MetricError: If k < 1, N < k, or k exceeds the rank of the centered data.
    """
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2:
        raise MetricError(f"Latents must be (N, D), got shape {latents.shape}")
    n = latents.shape[0]
    if k < 1 or n < k:
        raise MetricError(f"PCA needs 1 <= k <= N, got k={k} with N={n}", details={"k": k, "samples": n})
    rank = int(np.linalg.matrix_rank(latents - latents.mean(axis=0)))
    if k > rank:
        raise MetricError(f"k={k} exceeds the rank {rank} of the latent matrix", details={"k": k, "rank": rank})

    pca = PCA(n_components=k, svd_solver="full")
    projections = pca.fit_transform(latents)
    ratios = np.clip(pca.explained_variance_ratio_, 0.0, 1.0)
    logger.debug(f"Latent PCA | n={n} | dims={latents.shape[1]} | k={k} | cumulative={float(ratios.sum()):.4f}")
    return PCAResult(
        components=pca.components_,
        explained_variance_ratios=ratios,
        projections=projections,
        ids=list(ids) if ids is not None else [str(i) for i in range(n)],
    )
