"""
__Project__: SRL-VAE Lab
__Description__: Latent Analysis Package with loss-surface grids, smoothness scoring, latent PCA and cluster tightness.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.services.analysis.clusters import cluster_tightness
from app.services.analysis.pca import collect_latents, latent_pca
from app.services.analysis.surface import loss_surface, mean_smoothness, smoothness_score, surface_directions


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'cluster_tightness',
    'collect_latents',
    'latent_pca',
    'loss_surface',
    'mean_smoothness',
    'smoothness_score',
    'surface_directions',
]
