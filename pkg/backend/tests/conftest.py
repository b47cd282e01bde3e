"""
Shared fixtures: a tiny VAE, seeded synthetic images and a private artifact root.
"""

from pathlib import Path

import numpy as np
import pytest
import torch

from app.core.config import get_settings
from app.models.image_batch import ImageBatch
from app.schemas.model import VAEArchitecture
from app.services.data.synthetic import render_image, write_synthetic_corpus
from app.services.vae import build_model, default_extractor


def make_batch(count: int = 4, size: int = 32, seed: int = 0, dtype: torch.dtype = torch.float32) -> ImageBatch:
    """Synthetic images rendered in memory, ids img_00000.png, img_00001.png, ..."""
    rng = np.random.default_rng(seed)
    images = [torch.from_numpy(render_image(rng, size)).permute(2, 0, 1) for _ in range(count)]
    pixels = torch.stack(images).to(dtype) / 255.0
    return ImageBatch(pixels, tuple(f"img_{i:05d}.png" for i in range(count)))


@pytest.fixture(autouse=True)
def artifact_root(tmp_path, monkeypatch) -> Path:
    """Every test writes artifacts and logs under its own tmp directory."""
    root = tmp_path / "artifacts"
    monkeypatch.setenv("SRL_ARTIFACT_ROOT", str(root))
    monkeypatch.delenv("LOG_FILE", raising=False)
    get_settings.cache_clear()
    yield root
    get_settings.cache_clear()


@pytest.fixture
def tiny_architecture() -> VAEArchitecture:
    """Three stride-2 stages (f = 8), 4 latent channels."""
    return VAEArchitecture(in_channels=3, encoder_channels=(8, 16, 16), latent_channels=4)


@pytest.fixture
def tiny_model(tiny_architecture):
    return build_model(tiny_architecture, seed=0)


@pytest.fixture
def tiny_model64(tiny_architecture):
    return build_model(tiny_architecture, seed=0).to(dtype=torch.float64)


@pytest.fixture
def batch() -> ImageBatch:
    return make_batch(4)


@pytest.fixture
def batch64() -> ImageBatch:
    return make_batch(2, dtype=torch.float64)


@pytest.fixture
def extractor():
    return default_extractor(3, 0)


@pytest.fixture
def extractor64():
    return default_extractor(3, 0, dtype=torch.float64)


@pytest.fixture
def corpus_root(tmp_path) -> Path:
    """16 PNG files under <tmp>/corpus/images."""
    root = tmp_path / "corpus"
    write_synthetic_corpus(root, count=16, size=32, seed=0)
    return root


@pytest.fixture
def make_images():
    """Factory for synthetic batches of any size, seed or dtype."""
    return make_batch
