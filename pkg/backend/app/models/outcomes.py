"""
Results of attacks and probes.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

import torch

from app.models.image_batch import ImageBatch


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    """
    Result of one PGD attack on a batch.

    Attributes:
        delta: Final perturbation, |delta| <= epsilon componentwise.
        x_adv: clip(x + delta, 0, 1) as an ImageBatch with the clean ids.
        loss_trace: Batch-mean objective before each step and after the last
            (length iterations + 1).
        objective: Tag of the objective that was optimized.
        initial_losses: Per-image objective at the starting perturbation.
        final_losses: Per-image objective at the final perturbation.
        epsilon: Radius the attack was run with.
    """

    delta: torch.Tensor
    x_adv: ImageBatch
    loss_trace: List[float]
    objective: str
    initial_losses: torch.Tensor
    final_losses: torch.Tensor
    epsilon: float

    @property
    def linf_norms(self) -> torch.Tensor:
        """Per-image l-inf norm of delta."""
        return self.delta.detach().flatten(1).abs().amax(dim=1)

    @property
    def gain(self) -> float:
        """Change of the batch-mean objective over the attack."""
        return self.loss_trace[-1] - self.loss_trace[0]

    def per_image_rows(self) -> List[Dict[str, Any]]:
        """Rows of (id, initial_loss, final_loss, linf_norm)."""
        norms = self.linf_norms.tolist()
        return [
            {
                "id": sample_id,
                "initial_loss": float(initial),
                "final_loss": float(final),
                "linf_norm": float(norm),
            }
            for sample_id, initial, final, norm in zip(
                self.x_adv.ids, self.initial_losses.tolist(), self.final_losses.tolist(), norms
            )
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "objective": self.objective,
            "epsilon": self.epsilon,
            "loss_trace": list(self.loss_trace),
            "max_linf": float(self.linf_norms.max()),
        }


@dataclass(frozen=True, eq=False)
class PoisonProbeReport:
    """
    How far an epsilon-bounded attacker pulls source latents toward destination latents.

    reduction_ratio = final_gap / initial_gap; 1.0 by convention when initial_gap is 0.
    Lower means the encoder is easier to poison.
    """

    initial_gap: float
    final_gap: float
    reduction_ratio: float
    outcome: AttackOutcome
    per_image_ratios: List[float] = field(default_factory=list)

    def per_image_rows(self) -> List[Dict[str, Any]]:
        rows = self.outcome.per_image_rows()
        for row, ratio in zip(rows, self.per_image_ratios):
            row["reduction_ratio"] = ratio
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "initial_gap": self.initial_gap,
            "final_gap": self.final_gap,
            "reduction_ratio": self.reduction_ratio,
        }
