"""
__Project__: SRL-VAE Lab
__Description__: Training Package with the SRL objectives, the fine-tune loop and baseline pretraining.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.services.training.objectives import (
    LossBreakdown,
    ablation_total_loss,
    craft_adversarial,
    originality_loss,
    srl_objective,
    srl_total_loss,
)
from app.services.training.trainer import (
    FinetuneResult,
    PretrainResult,
    SRLTrainer,
    finetune,
    pretrain_baseline,
)


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'FinetuneResult',
    'LossBreakdown',
    'PretrainResult',
    'SRLTrainer',
    'ablation_total_loss',
    'craft_adversarial',
    'finetune',
    'originality_loss',
    'pretrain_baseline',
    'srl_objective',
    'srl_total_loss',
]
