"""
__Project__: SRL-VAE Lab
__Description__: Image Corpus Loader Module that scans a directory tree of PNG/JPEG files, decodes, center-crops and resizes them to the target resolution, and assigns every sample to a train or validation split as a deterministic function of its id and the split seed.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from app.core.exceptions import ConfigurationError, DatasetError
from app.models.image_batch import ImageBatch
from app.schemas.data import DatasetSpec


# =============================================================================
# MODULE CONFIGURATION
# =============================================================================

logger = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = (".png", ".jpg", ".jpeg")


# =============================================================================
# DATA CLASSES
# =============================================================================

@dataclass(frozen=True, eq=False)
class DatasetSplits:
    """Train and validation splits of one corpus."""

    train: ImageBatch
    val: Optional[ImageBatch] = None

    def __iter__(self) -> Iterator[Tuple[str, ImageBatch]]:
        yield "train", self.train
        if self.val is not None:
            yield "val", self.val

    def get(self, name: str) -> ImageBatch:
        """Split by name ("train" or "val")."""
        if name not in ("train", "val"):
            raise ConfigurationError(f"Unknown split: {name}", details={"split": name})
        split = getattr(self, name)
        if split is None:
            raise ConfigurationError(f"Split '{name}' is disabled by a zero fraction", details={"split": name})
        return split


# =============================================================================
# IMAGE CORPUS LOADER CLASS
# =============================================================================

class ImageCorpusLoader:
    """
    Image Corpus Loader Class.

    Decodes image files into [0, 1] tensors at a fixed resolution. Decoding runs
    on a thread pool whose results are consumed in submission order, so the
    delivered tensors never depend on scheduling.

    Attributes:
        resolution (tuple): Target (H, W).
        channels (int): 1 for grayscale, 3 for RGB (grayscale files are replicated).
        num_workers (int): Decode threads.

    Example:
        >>> loader = ImageCorpusLoader(resolution=(32, 32))
        >>> ids, pixels = loader.load_directory("data/toy")
        >>> pixels.shape
        torch.Size([5000, 3, 32, 32])
    """

    # -------------------------------------------------------------------------
    # INITIALIZATION
    # -------------------------------------------------------------------------

    def __init__(self, resolution: Tuple[int, int] = (32, 32), channels: int = 3, num_workers: int = 4):
        self.resolution = tuple(resolution)
        self.channels = channels
        self.num_workers = num_workers

    # -------------------------------------------------------------------------
    # SINGLE IMAGE LOADING
    # -------------------------------------------------------------------------

    def load_image(self, file_path: Path) -> torch.Tensor:
        """
        Decode one image, center-crop it to a square and resize it.

        Resizing is bilinear; Pillow widens the filter support when shrinking,
        which gives the antialiased result.

        Args:
            file_path (Path): Image file.

        Returns:
            torch.Tensor: (C, H, W) float32 tensor in [0, 1].

        Raises:
            DatasetError: If the file cannot be decoded.
        """
        try:
            with Image.open(file_path) as img:
                img = img.convert("RGB" if self.channels == 3 else "L")
                width, height = img.size
                side = min(width, height)
                left = (width - side) // 2
                top = (height - side) // 2
                img = img.crop((left, top, left + side, top + side))
                target_h, target_w = self.resolution
                img = img.resize((target_w, target_h), resample=Image.Resampling.BILINEAR)
                array = np.asarray(img, dtype=np.uint8)
        except (UnidentifiedImageError, OSError, ValueError) as e:
            raise DatasetError(
                f"Failed to decode image: {file_path}",
                details={"file_path": str(file_path), "error": str(e)}
            )

        if array.ndim == 2:
            array = array[:, :, None]
        tensor = torch.from_numpy(array.astype(np.float32) / 255.0)
        return tensor.permute(2, 0, 1).contiguous()

    # -------------------------------------------------------------------------
    # DIRECTORY LOADING
    # -------------------------------------------------------------------------

    def scan(self, root: Path) -> List[Path]:
        """All supported files under root, sorted by their root-relative path."""
        files = [
            path for path in root.rglob("*")
            if path.is_file() and path.suffix.lower() in SUPPORTED_EXTENSIONS
        ]
        return sorted(files, key=lambda p: p.relative_to(root).as_posix())

    def load_directory(self, root: Path) -> Tuple[List[str], torch.Tensor]:
        """
        Load every decodable image under root.

        Args:
            root (Path): Corpus directory.

        Returns:
            Tuple of (ids, pixels) where ids are root-relative POSIX paths and
            pixels is an (N, C, H, W) tensor.

        Raises:
            ConfigurationError: If root does not exist.
            DatasetError: If fewer than two images decode.
        """
        root = Path(root)

        # ----- VALIDATION: Check directory exists -----
        if not root.is_dir():
            raise ConfigurationError(
                f"Dataset root not found: {root}",
                details={"root": str(root)}
            )

        files = self.scan(root)
        ids: List[str] = []
        images: List[torch.Tensor] = []
        failed: List[str] = []

        with ThreadPoolExecutor(max_workers=self.num_workers) as pool:
            results = pool.map(self._try_load, files)
            for path, image in zip(files, results):
                sample_id = path.relative_to(root).as_posix()
                if image is None:
                    failed.append(sample_id)
                    continue
                ids.append(sample_id)
                images.append(image)

        logger.info(
            f"Loaded {len(ids)} images from {root} | failed={len(failed)} | "
            f"resolution={self.resolution} | channels={self.channels}"
        )

        if len(ids) < 2:
            raise DatasetError(
                f"Dataset root {root} contains fewer than 2 decodable images",
                details={"root": str(root), "loaded": len(ids), "failed": failed}
            )
        return ids, torch.stack(images)

    def _try_load(self, path: Path) -> Optional[torch.Tensor]:
        """Decode one file, logging a warning instead of raising."""
        try:
            return self.load_image(path)
        except DatasetError as e:
            logger.warning(f"Skipping undecodable file {path.name}: {e.details.get('error')}")
            return None


# =============================================================================
# SPLITTING
# =============================================================================

def split_key(sample_id: str, seed: int) -> str:
    """Position of a sample in the split ordering; depends only on (id, seed)."""
    return hashlib.sha256(f"{seed}:{sample_id}".encode("utf-8")).hexdigest()


def assign_splits(ids: List[str], train_fraction: float, seed: int) -> Dict[str, List[str]]:
    """
    Partition ids into train and val.

    Samples are ordered by split_key and the first round(N * train_fraction)
    go to train, so split sizes are exact and membership never depends on
    file-system order.

    Membership is a function of the whole id set and the seed, not of each
    (id, seed) alone: the boundary is a rank. Adding or removing one image
    moves at most one other image across the boundary.
    """
    ordered = sorted(ids, key=lambda sample_id: (split_key(sample_id, seed), sample_id))
    n_train = int(math.floor(len(ordered) * train_fraction + 0.5))
    return {"train": sorted(ordered[:n_train]), "val": sorted(ordered[n_train:])}


# =============================================================================
# DATASET LOADING
# =============================================================================

def load_dataset(spec: DatasetSpec) -> DatasetSplits:
    """
    Load a corpus and split it.

    Args:
        spec (DatasetSpec): Corpus location, resolution, split fractions and seed.

    Returns:
        DatasetSplits: One ImageBatch per split, ordered by id.

    Raises:
        ConfigurationError: If the root is missing.
        DatasetError: If the corpus is too small or a split comes out empty.

    Example:
        >>> splits = load_dataset(DatasetSpec(root=Path("data/toy")))
        >>> len(splits.train), len(splits.val)
        (4500, 500)
    """
    loader = ImageCorpusLoader(spec.resolution, spec.channels, spec.num_workers)
    ids, pixels = loader.load_directory(spec.root)

    assignment = assign_splits(ids, spec.train_fraction, spec.split_seed)
    position = {sample_id: i for i, sample_id in enumerate(ids)}

    fractions = {"train": spec.train_fraction, "val": spec.val_fraction}
    batches: Dict[str, Optional[ImageBatch]] = {"train": None, "val": None}
    for name, members in assignment.items():
        if fractions[name] == 0.0:
            continue
        if not members:
            raise DatasetError(
                f"Split '{name}' is empty",
                details={"split": name, "total": len(ids), "train_fraction": spec.train_fraction}
            )
        index = torch.as_tensor([position[m] for m in members], dtype=torch.long)
        batches[name] = ImageBatch(pixels.index_select(0, index), tuple(members))

    val_size = len(batches["val"]) if batches["val"] is not None else 0
    logger.info(f"Split corpus | train={len(batches['train'])} | val={val_size} | seed={spec.split_seed}")
    return DatasetSplits(train=batches["train"], val=batches["val"])


def split_fingerprint(batch: ImageBatch) -> str:
    """Hash of the sorted id list of a split."""
    return hashlib.sha256("\n".join(sorted(batch.ids)).encode("utf-8")).hexdigest()
