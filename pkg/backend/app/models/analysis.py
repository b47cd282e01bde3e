"""
Results of the latent-space analyses.
"""

from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np
import torch


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """
    (2R+1) x (2R+1) latent-MSE values around one anchor image, max-normalized.

    Row i, column j holds the perturbation a_i * d1 + b_j * d2 with
    a_i, b_j running from -radius to +radius.
    """

    grid: np.ndarray
    d1: torch.Tensor
    d2: torch.Tensor
    radius: float
    half_res: int
    seed: int
    anchor_id: str
    raw_max: float

    def sidecar(self) -> Dict[str, Any]:
        """JSON sidecar stored next to the CSV matrix."""
        return {
            "anchor_id": self.anchor_id,
            "radius": self.radius,
            "half_res": self.half_res,
            "directions_seed": self.seed,
            "raw_max": self.raw_max,
            "shape": list(self.grid.shape),
        }


@dataclass(frozen=True, eq=False)
class PCAResult:
    """Principal components of flattened latent means."""

    components: np.ndarray
    explained_variance_ratios: np.ndarray
    projections: np.ndarray
    ids: List[str]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": int(self.components.shape[0]),
            "explained_variance_ratios": [float(r) for r in self.explained_variance_ratios],
            "cumulative": float(np.sum(self.explained_variance_ratios)),
        }


@dataclass(frozen=True, eq=False)
class ClusterTightness:
    """Latent displacement under input noise relative to the spread between images."""

    mean_pair_dist: float
    baseline_spread: float
    tightness_ratio: float
    noise_sigma: float
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_pair_dist": self.mean_pair_dist,
            "baseline_spread": self.baseline_spread,
            "tightness_ratio": self.tightness_ratio,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }
