"""
ImageBatch: the unit every module exchanges. Pixels live in [0, 1], shape (N, C, H, W),
with one stable id per sample.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterator, Sequence, Tuple

import torch

from app.core.exceptions import ShapeError
from app.utils.validators import require_divisible


@dataclass(frozen=True, eq=False)
class ImageBatch:
    """Immutable batch of images with their sample ids."""

    pixels: torch.Tensor
    ids: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ids", tuple(self.ids))
        if self.pixels.dim() != 4:
            raise ShapeError(
                f"ImageBatch pixels must be (N, C, H, W), got {tuple(self.pixels.shape)}",
                details={"shape": list(self.pixels.shape)}
            )
        n, c, h, w = self.pixels.shape
        if n < 1:
            raise ShapeError("ImageBatch must hold at least one image")
        if c not in (1, 3):
            raise ShapeError(f"ImageBatch channels must be 1 or 3, got {c}", details={"channels": c})
        if h < 8 or w < 8:
            raise ShapeError(f"ImageBatch images must be at least 8x8, got {h}x{w}", details={"height": h, "width": w})
        if len(self.ids) != n:
            raise ShapeError(
                f"ImageBatch has {n} images but {len(self.ids)} ids",
                details={"images": n, "ids": len(self.ids)}
            )
        if not bool(torch.isfinite(self.pixels).all()):
            raise ShapeError("ImageBatch pixels must be finite")
        if float(self.pixels.min()) < 0.0 or float(self.pixels.max()) > 1.0:
            raise ShapeError(
                "ImageBatch pixels must lie in [0, 1]",
                details={"min": float(self.pixels.min()), "max": float(self.pixels.max())}
            )

    # -------------------------------------------------------------------------
    # Shape helpers
    # -------------------------------------------------------------------------

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return tuple(self.pixels.shape)

    @property
    def spatial(self) -> Tuple[int, int]:
        return int(self.pixels.shape[2]), int(self.pixels.shape[3])

    def __len__(self) -> int:
        return self.size

    def require_divisible(self, factor: int) -> None:
        """Raise ShapeError if H or W is not a multiple of factor."""
        require_divisible(self.spatial, factor)

    # -------------------------------------------------------------------------
    # Derived batches
    # -------------------------------------------------------------------------

    def select(self, indices: Sequence[int]) -> "ImageBatch":
        """Sub-batch in the given order."""
        index = torch.as_tensor(list(indices), dtype=torch.long, device=self.pixels.device)
        return ImageBatch(self.pixels.index_select(0, index), tuple(self.ids[i] for i in index.tolist()))

    def head(self, count: int) -> "ImageBatch":
        """First `count` images (all if count exceeds the size)."""
        return self.select(range(min(count, self.size)))

    def chunks(self, batch_size: int) -> Iterator["ImageBatch"]:
        """Consecutive sub-batches without shuffling."""
        for start in range(0, self.size, batch_size):
            yield self.select(range(start, min(start + batch_size, self.size)))

    def with_pixels(self, pixels: torch.Tensor) -> "ImageBatch":
        """Same ids, new pixels (validated)."""
        return ImageBatch(pixels, self.ids)

    def rolled(self, shift: int = 1) -> "ImageBatch":
        """Batch whose i-th image is image i+shift (mod N); ids follow the pixels."""
        order = [(i + shift) % self.size for i in range(self.size)]
        return self.select(order)

    def to(self, device: Any) -> "ImageBatch":
        return ImageBatch(self.pixels.to(device), self.ids)

    def to_dict(self) -> Dict[str, Any]:
        """Summary for logs and manifests (pixels omitted)."""
        return {"ids": list(self.ids), "shape": list(self.shape)}
