"""
Desk-scale convolutional encoder and decoder mirroring the SD-VAE latent geometry:
stride-2 stages down to an (H/f, W/f) latent with a few channels, and a decoder
whose output is bounded to the pixel domain by a sigmoid.
"""

import math
from typing import Tuple

import torch
from torch import nn

from app.schemas.model import VAEArchitecture


def _norm(channels: int) -> nn.GroupNorm:
    # GroupNorm keeps every sample independent of the rest of its batch
    return nn.GroupNorm(math.gcd(channels, 8), channels)


class Encoder(nn.Module):
    """E_theta: image in [0, 1] -> (mu, log_var) at 1/f resolution."""

    def __init__(self, architecture: VAEArchitecture):
        super().__init__()
        widths = architecture.encoder_channels
        layers = [nn.Conv2d(architecture.in_channels, widths[0], 3, padding=1), nn.SiLU()]
        previous = widths[0]
        for width in widths:
            layers += [nn.Conv2d(previous, width, 3, stride=2, padding=1), _norm(width), nn.SiLU()]
            previous = width
        self.body = nn.Sequential(*layers)
        self.head = nn.Conv2d(previous, 2 * architecture.latent_channels, 1)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.head(self.body(x * 2.0 - 1.0))
        mu, log_var = h.chunk(2, dim=1)
        return mu, log_var


class Decoder(nn.Module):
    """D_phi: latent -> image in (0, 1)."""

    def __init__(self, architecture: VAEArchitecture):
        super().__init__()
        widths = list(reversed(architecture.encoder_channels))
        layers = [nn.Conv2d(architecture.latent_channels, widths[0], 3, padding=1), nn.SiLU()]
        previous = widths[0]
        for width in widths[1:] + widths[-1:]:
            layers += [nn.ConvTranspose2d(previous, width, 4, stride=2, padding=1), _norm(width), nn.SiLU()]
            previous = width
        layers.append(nn.Conv2d(previous, architecture.in_channels, 3, padding=1))
        self.body = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.body(z))
