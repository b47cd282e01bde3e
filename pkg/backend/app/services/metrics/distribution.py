"""
Distribution-level proxies over pooled PerceptualExtractor features: the
Frechet distance between Gaussian fits (rFID-proxy) and the cosine between
mean features (CLIP-proxy). Neither is comparable with Inception-FID or CLIP.
"""

import logging
from typing import Tuple

import numpy as np
import torch
from scipy import linalg
from sklearn.covariance import LedoitWolf

from app.core.exceptions import MetricError, ShapeError
from app.services.vae.perceptual import PerceptualExtractor

logger = logging.getLogger(__name__)

COVARIANCE_EPS = 1e-6
IMAGINARY_TOLERANCE = 1e-3
PSD_TOLERANCE = -1e-8


def pooled_features(extractor: PerceptualExtractor, pixels: torch.Tensor, batch_size: int = 64) -> np.ndarray:
    """(N, D) float64 matrix of spatially pooled multi-scale features."""
    rows = []
    with torch.no_grad():
        for start in range(0, pixels.shape[0], batch_size):
            chunk = pixels[start:start + batch_size].to(next(extractor.parameters()).dtype)
            rows.append(extractor.pooled(chunk).to(torch.float64).cpu().numpy())
    return np.concatenate(rows, axis=0)


def canonical_rows(features: np.ndarray) -> np.ndarray:
    """Rows in lexicographic order, so statistics do not depend on sample order."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError(f"Feature matrix must be 2-D, got shape {features.shape}")
    order = np.lexsort(features.T[::-1])
    return features[order]


def feature_moments(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean and covariance of a feature set.

    Uses Ledoit-Wolf shrinkage when there are no more samples than feature
    dimensions, where the sample covariance would be singular.

    Raises:
        MetricError: If fewer than two samples are given.
    """
    features = canonical_rows(features)
    n, d = features.shape
    if n < 2:
        raise MetricError(f"Need at least 2 samples for a covariance, got {n}", details={"samples": n})
    mean = features.mean(axis=0)
    if n <= d:
        logger.debug(f"Using Ledoit-Wolf covariance | samples={n} | dims={d}")
        covariance = LedoitWolf(store_precision=False).fit(features).covariance_
    else:
        covariance = np.cov(features, rowvar=False)
    return mean, np.atleast_2d(covariance)


def frechet_from_moments(mu_a: np.ndarray, sigma_a: np.ndarray, mu_b: np.ndarray, sigma_b: np.ndarray) -> float:
    """
    ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)) with 1e-6 * I added to both covariances.

    Raises:
        MetricError: On a non-PSD covariance or a matrix square root with a
            large imaginary part.
    """
    mu_a, mu_b = np.atleast_1d(np.asarray(mu_a, dtype=np.float64)), np.atleast_1d(np.asarray(mu_b, dtype=np.float64))
    sigma_a, sigma_b = np.atleast_2d(np.asarray(sigma_a, dtype=np.float64)), np.atleast_2d(np.asarray(sigma_b, dtype=np.float64))
    if mu_a.shape != mu_b.shape or sigma_a.shape != sigma_b.shape or sigma_a.shape != (mu_a.size, mu_a.size):
        raise ShapeError(
            "Moment shapes do not match",
            details={"mu_a": list(mu_a.shape), "mu_b": list(mu_b.shape), "sigma_a": list(sigma_a.shape), "sigma_b": list(sigma_b.shape)}
        )

    offset = COVARIANCE_EPS * np.eye(mu_a.size)
    sigma_a = sigma_a + offset
    sigma_b = sigma_b + offset
    for name, sigma in (("a", sigma_a), ("b", sigma_b)):
        smallest = float(np.min(np.linalg.eigvalsh((sigma + sigma.T) / 2.0)))
        if smallest < PSD_TOLERANCE:
            raise MetricError(f"Covariance {name} is not positive semi-definite", details={"min_eigenvalue": smallest})

    covmean = linalg.sqrtm(sigma_a @ sigma_b)
    if np.iscomplexobj(covmean):
        imaginary = float(np.max(np.abs(covmean.imag)))
        if imaginary > IMAGINARY_TOLERANCE:
            raise MetricError("Matrix square root has a large imaginary component", details={"max_imag": imaginary})
        covmean = covmean.real

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * np.trace(covmean))
    return max(0.0, value)


def frechet_feature_distance(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """
    Frechet distance between Gaussian fits of two feature sets (rFID-proxy).

    Raises:
        ShapeError: If the feature dimensions differ.
        MetricError: If either set has fewer than two samples.
    """
    set_a, set_b = np.asarray(set_a, dtype=np.float64), np.asarray(set_b, dtype=np.float64)
    if set_a.ndim != 2 or set_b.ndim != 2 or set_a.shape[1] != set_b.shape[1]:
        raise ShapeError(
            "Feature sets must be (N, D) with the same D",
            details={"set_a": list(set_a.shape), "set_b": list(set_b.shape)}
        )
    mu_a, sigma_a = feature_moments(set_a)
    mu_b, sigma_b = feature_moments(set_b)
    return frechet_from_moments(mu_a, sigma_a, mu_b, sigma_b)


def editing_similarity_proxy(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """
    Cosine similarity between the mean pooled features of two sets (CLIP-proxy).

    Raises:
        ShapeError: If the feature dimensions differ.
        MetricError: If a mean feature vector has zero norm.
    """
    features_a, features_b = canonical_rows(features_a), canonical_rows(features_b)
    if features_a.shape[1] != features_b.shape[1]:
        raise ShapeError(
            "Feature sets must share the feature dimension",
            details={"set_a": list(features_a.shape), "set_b": list(features_b.shape)}
        )
    mean_a, mean_b = features_a.mean(axis=0), features_b.mean(axis=0)
    norm_a, norm_b = float(np.linalg.norm(mean_a)), float(np.linalg.norm(mean_b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise MetricError("Cosine similarity is undefined for a zero-norm feature mean")
    cosine = float(mean_a @ mean_b) / (norm_a * norm_b)
    return max(-1.0, min(1.0, cosine))
