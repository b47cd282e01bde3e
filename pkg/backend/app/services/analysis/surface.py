"""
Latent loss surfaces: encoder sensitivity on a plane of input perturbations
spanned by two random orthonormal pixel-space directions.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
import torch

from app.core.exceptions import ConfigurationError, ShapeError
from app.models.analysis import SurfaceGrid
from app.models.image_batch import ImageBatch
from app.services.vae.model import ModelHandle
from app.services.vae.operations import encode

logger = logging.getLogger(__name__)


def surface_directions(shape: Tuple[int, ...], seed: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Two float64 directions of the given image shape: per-pixel Gaussian,
    unit l2 norm, d2 Gram-Schmidt orthogonalized against d1.
    """
    generator = torch.Generator().manual_seed(seed)
    d1 = torch.randn(shape, generator=generator, dtype=torch.float64)
    d2 = torch.randn(shape, generator=generator, dtype=torch.float64)
    d1 = d1 / torch.linalg.vector_norm(d1)
    d2 = d2 - (d2 * d1).sum() * d1
    d2 = d2 / torch.linalg.vector_norm(d2)
    return d1, d2


def loss_surface(
    model: ModelHandle,
    x: ImageBatch,
    radius: float,
    half_res: int,
    seed: int,
    directions: Optional[Tuple[torch.Tensor, torch.Tensor]] = None,
) -> SurfaceGrid:
    """
    Max-normalized grid of MSE(E(x + a_i d1 + b_j d2).mu, E(x).mu).

    Offsets run from -radius to +radius in 2 * half_res + 1 steps. The
    directions have unit l2 norm, so offsets are scaled by sqrt(numel) and
    `radius` is the per-pixel RMS of the perturbation along one axis.
    Perturbed images are clipped to [0, 1] and every cell is encoded on its
    own, which keeps the grid independent of evaluation order.

    Args:
        model: Encoder under analysis.
        x: A batch holding exactly one anchor image.
        radius: Half-width of the grid in pixel units.
        half_res: R; the grid is (2R + 1) x (2R + 1).
        seed: Seed of the random directions.
        directions: Explicit (d1, d2), overriding the seeded ones.

    Raises:
        ShapeError: If x does not hold exactly one image.
        ConfigurationError: If half_res < 2 or radius <= 0.
    """
    if x.size != 1:
        raise ShapeError(f"loss_surface takes a single anchor image, got {x.size}", details={"images": x.size})
    if half_res < 2:
        raise ConfigurationError(f"half_res must be at least 2, got {half_res}", details={"half_res": half_res})
    if radius <= 0:
        raise ConfigurationError(f"radius must be positive, got {radius}", details={"radius": radius})

    pixels = x.pixels.detach()
    d1, d2 = directions if directions is not None else surface_directions(tuple(pixels.shape), seed)
    d1, d2 = d1.to(torch.float64), d2.to(torch.float64)
    scale = radius * math.sqrt(pixels.numel())
    offsets = [scale * (i - half_res) / half_res for i in range(2 * half_res + 1)]

    size = 2 * half_res + 1
    raw = np.zeros((size, size), dtype=np.float64)
    with torch.no_grad():
        clean_mu = encode(model, pixels).mu
        for i, a in enumerate(offsets):
            for j, b in enumerate(offsets):
                perturbation = (a * d1 + b * d2).to(pixels.dtype)
                mu = encode(model, (pixels + perturbation).clamp(0.0, 1.0)).mu
                raw[i, j] = float(((mu - clean_mu) ** 2).to(torch.float64).mean())

    raw_max = float(raw.max())
    grid = raw / raw_max if raw_max > 0 else raw
    logger.debug(f"Loss surface | anchor={x.ids[0]} | R={half_res} | radius={radius:.5f} | raw_max={raw_max:.6g}")
    return SurfaceGrid(
        grid=grid,
        d1=d1,
        d2=d2,
        radius=radius,
        half_res=half_res,
        seed=seed,
        anchor_id=x.ids[0],
        raw_max=raw_max,
    )


def smoothness_score(grid: Union[SurfaceGrid, np.ndarray]) -> float:
    """
    Mean |first difference| along rows plus the same along columns; lower is smoother.

    A constant grid scores 0 and a 21-cell ramp from 0 to 1 along one axis scores 0.05.
    """
    values = np.asarray(grid.grid if isinstance(grid, SurfaceGrid) else grid, dtype=np.float64)
    down = np.abs(np.diff(values, axis=0))
    across = np.abs(np.diff(values, axis=1))
    return float(down.mean() + across.mean())


def mean_smoothness(
    model: ModelHandle,
    anchors: ImageBatch,
    radius: float,
    half_res: int,
    seed: int,
) -> Tuple[float, List[SurfaceGrid]]:
    """Smoothness averaged over anchor images, each with the same direction seed."""
    grids = [loss_surface(model, anchors.select([i]), radius, half_res, seed) for i in range(anchors.size)]
    scores = [smoothness_score(g) for g in grids]
    return math.fsum(scores) / len(scores), grids
