"""
__Project__: SRL-VAE Lab
__Description__: Metrics Package with pixel-space quality metrics, feature-distribution proxies and reconstruction reports.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.services.metrics.distribution import (
    editing_similarity_proxy,
    feature_moments,
    frechet_feature_distance,
    frechet_from_moments,
    pooled_features,
)
from app.services.metrics.image_quality import per_image_psnr, per_image_ssim, psnr, ssim
from app.services.metrics.report import quality_metrics, reconstruction_report, report_json, save_report


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'editing_similarity_proxy',
    'feature_moments',
    'frechet_feature_distance',
    'frechet_from_moments',
    'pooled_features',
    'per_image_psnr',
    'per_image_ssim',
    'psnr',
    'quality_metrics',
    'reconstruction_report',
    'report_json',
    'save_report',
    'ssim',
]
