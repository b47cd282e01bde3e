"""
Pixel-space quality metrics: PSNR and SSIM.

Both are computed per image in float64 with scikit-image and averaged with
math.fsum, which rounds exactly once, so batch order never changes the result.
"""

import math
from typing import Iterator, List, Tuple, Union

import numpy as np
import torch
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio, structural_similarity

from app.core.exceptions import MetricError
from app.models.image_batch import ImageBatch
from app.schemas.report import PSNR_CAP_DB
from app.utils.validators import require_same_shape

Images = Union[ImageBatch, torch.Tensor]

MSE_FLOOR = 1e-10
DATA_RANGE = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_float64(a: Images, b: Images) -> tuple:
    a = a.pixels if isinstance(a, ImageBatch) else a
    b = b.pixels if isinstance(b, ImageBatch) else b
    require_same_shape(a, b, "metric inputs")
    return a.detach().to(torch.float64), b.detach().to(torch.float64)


def _image_pairs(a: Images, b: Images) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """(H, W, C) float64 arrays of every image pair."""
    a, b = _as_float64(a, b)
    a_np = a.cpu().permute(0, 2, 3, 1).numpy()
    b_np = b.cpu().permute(0, 2, 3, 1).numpy()
    for index in range(a_np.shape[0]):
        yield a_np[index], b_np[index]


def batch_mean(values: List[float]) -> float:
    """Order-independent mean."""
    return math.fsum(values) / len(values)


def per_image_mse(a: Images, b: Images) -> List[float]:
    a, b = _as_float64(a, b)
    return ((a - b) ** 2).flatten(1).mean(dim=1).tolist()


def per_image_psnr(a: Images, b: Images) -> List[float]:
    """PSNR of every image pair in dB, capped at 99 dB when the MSE is below 1e-10."""
    values = []
    for image_a, image_b in _image_pairs(a, b):
        if mean_squared_error(image_a, image_b) < MSE_FLOOR:
            values.append(PSNR_CAP_DB)
            continue
        value = float(peak_signal_noise_ratio(image_a, image_b, data_range=DATA_RANGE))
        values.append(min(PSNR_CAP_DB, value))
    return values


def psnr(a: Images, b: Images) -> float:
    """
    Mean per-image PSNR in dB for images in [0, 1].

    Raises:
        ShapeError: If the inputs differ in shape.
    """
    return batch_mean(per_image_psnr(a, b))


def per_image_ssim(a: Images, b: Images) -> List[float]:
    """Mean local SSIM of every image over valid windows and channels."""
    a, b = _as_float64(a, b)
    height, width = a.shape[-2:]
    if height < SSIM_WINDOW or width < SSIM_WINDOW:
        raise MetricError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {height}x{width}",
            details={"height": int(height), "width": int(width)}
        )
    values = []
    for image_a, image_b in _image_pairs(a, b):
        value = structural_similarity(
            image_a,
            image_b,
            channel_axis=-1,
            data_range=DATA_RANGE,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
        values.append(max(-1.0, min(1.0, float(value))))
    return values


def ssim(a: Images, b: Images) -> float:
    """
    Structural similarity with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03.

    Raises:
        MetricError: If H or W is smaller than the window.
        ShapeError: If the inputs differ in shape.
    """
    return batch_mean(per_image_ssim(a, b))
