"""
Deterministic toy corpus: smooth gradients, discs and stripes rendered to PNG files.
Used to run every pipeline hermetically.
"""

import logging
from pathlib import Path
from typing import List

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)


def render_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """One (size, size, 3) uint8 image."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / max(size - 1, 1)
    base = rng.uniform(0.1, 0.9, size=3)
    slope = rng.uniform(-0.4, 0.4, size=(2, 3))
    image = base + xx[..., None] * slope[0] + yy[..., None] * slope[1]

    cy, cx = rng.uniform(0.2, 0.8, size=2)
    radius = rng.uniform(0.1, 0.35)
    disc = ((yy - cy) ** 2 + (xx - cx) ** 2) < radius ** 2
    image[disc] = rng.uniform(0.0, 1.0, size=3)

    if rng.uniform() < 0.5:
        frequency = rng.integers(2, 6)
        angle = rng.uniform(0, np.pi)
        phase = (np.cos(angle) * xx + np.sin(angle) * yy) * frequency * 2 * np.pi
        image += 0.15 * np.sin(phase)[..., None]

    return (np.clip(image, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def write_synthetic_corpus(root: Path, count: int, size: int = 32, seed: int = 0) -> List[Path]:
    """
    Write `count` PNG files under root/images/.

    Args:
        root: Corpus directory (created if missing).
        count: Number of images.
        size: Side length in pixels.
        seed: Seed of the rendering RNG.

    Returns:
        Paths of the written files.
    """
    rng = np.random.default_rng(seed)
    out_dir = Path(root) / "images"
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for index in range(count):
        path = out_dir / f"img_{index:05d}.png"
        Image.fromarray(render_image(rng, size)).save(path)
        paths.append(path)
    logger.info(f"Wrote {count} synthetic images to {out_dir} | size={size} | seed={seed}")
    return paths
