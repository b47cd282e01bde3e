"""
__Project__: SRL-VAE Lab
__Description__: Attacks Package with l-inf bounded PGD attacks on the VAE and the poison-crafting probe.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.services.attacks.methods import (
    ATTACK_METHODS,
    DEFAULT_EPSILON,
    encoder_targeted_attack,
    mist_textural_attack,
    pgd_reconstruction_attack,
    target_batch,
)
from app.services.attacks.pgd import ball_radius, clip_to_domain, init_delta, project_linf, run_pgd
from app.services.attacks.poison import poison_crafting_probe


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'ATTACK_METHODS',
    'DEFAULT_EPSILON',
    'ball_radius',
    'clip_to_domain',
    'encoder_targeted_attack',
    'init_delta',
    'mist_textural_attack',
    'pgd_reconstruction_attack',
    'poison_crafting_probe',
    'project_linf',
    'run_pgd',
    'target_batch',
]
