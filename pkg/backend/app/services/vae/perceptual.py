"""
Perceptual feature extractor used by the LPIPS-style loss and by the
rFID / CLIP proxies.

The default weights are a seeded random convolution pyramid (three scales);
a pretrained pyramid with the same layout can be plugged in from a
safetensors file.
"""

import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import List, Literal

import torch
from safetensors.torch import load_file
from torch import nn

from app.core.exceptions import CheckpointError

logger = logging.getLogger(__name__)

WeightSource = Literal["pretrained", "seeded-random"]


class PerceptualExtractor(nn.Module):
    """
    Fixed multi-scale feature map.

    Attributes:
        widths: Channel count per scale; scale s runs at 1/2**s resolution.
        weight_source: "seeded-random" or "pretrained".
        seed: Seed of the random weights (None for pretrained weights).
    """

    WIDTHS = (16, 32, 64)

    def __init__(self, in_channels: int = 3, seed: int = 0):
        super().__init__()
        self.in_channels = in_channels
        self.seed = seed
        self.weight_source: WeightSource = "seeded-random"
        stages = []
        previous = in_channels
        for index, width in enumerate(self.WIDTHS):
            stride = 1 if index == 0 else 2
            stages.append(nn.Sequential(nn.Conv2d(previous, width, 3, stride=stride, padding=1), nn.SiLU()))
            previous = width
        self.stages = nn.ModuleList(stages)
        self._seed_weights(seed)
        self.requires_grad_(False)
        self.eval()

    def _seed_weights(self, seed: int) -> None:
        """He-normal weights drawn from a private generator, zero biases."""
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for stage in self.stages:
                conv = stage[0]
                fan_in = conv.in_channels * conv.kernel_size[0] * conv.kernel_size[1]
                weight = torch.randn(conv.weight.shape, generator=generator) * math.sqrt(2.0 / fan_in)
                conv.weight.copy_(weight)
                conv.bias.zero_()

    @classmethod
    def from_file(cls, path: str, in_channels: int = 3) -> "PerceptualExtractor":
        """
        Load pretrained weights with the same layout.

        Raises:
            CheckpointError: If the file is missing or its tensors do not fit.
        """
        weights_path = Path(path)
        if not weights_path.is_file():
            raise CheckpointError(f"Extractor weights not found: {path}", details={"path": str(path)})
        extractor = cls(in_channels=in_channels)
        try:
            extractor.load_state_dict(load_file(str(weights_path)), strict=True)
        except RuntimeError as e:
            raise CheckpointError(f"Extractor weights do not match the pyramid layout: {e}", details={"path": str(path)})
        extractor.weight_source = "pretrained"
        extractor.seed = None
        extractor.requires_grad_(False)
        extractor.eval()
        logger.info(f"Loaded pretrained perceptual extractor from {path}")
        return extractor

    def train(self, mode: bool = True) -> "PerceptualExtractor":
        # weights are fixed; stay in eval mode
        return super().train(False)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        features = []
        h = x * 2.0 - 1.0
        for stage in self.stages:
            h = stage(h)
            features.append(h)
        return features

    def pooled(self, x: torch.Tensor) -> torch.Tensor:
        """Spatially averaged features of every scale, concatenated to (N, sum(WIDTHS))."""
        return torch.cat([f.mean(dim=(2, 3)) for f in self.forward(x)], dim=1)

    def describe(self) -> dict:
        return {"weight_source": self.weight_source, "seed": self.seed, "widths": list(self.WIDTHS)}


@lru_cache(maxsize=8)
def _cached_extractor(in_channels: int, seed: int, dtype: torch.dtype) -> PerceptualExtractor:
    return PerceptualExtractor(in_channels=in_channels, seed=seed).to(dtype)


def default_extractor(in_channels: int = 3, seed: int = 0, dtype: torch.dtype = torch.float32) -> PerceptualExtractor:
    """Shared seeded-random extractor (cached per channels/seed/dtype)."""
    return _cached_extractor(in_channels, seed, dtype)
