"""
Epoch batching: every sample exactly once per epoch, order fixed by the shuffle seed.
"""

import logging
from typing import Iterator, List

import torch

from app.core.exceptions import ConfigurationError
from app.models.image_batch import ImageBatch

logger = logging.getLogger(__name__)


def make_batches(split: ImageBatch, batch_size: int, shuffle_seed: int) -> List[ImageBatch]:
    """
    Shuffle a split and cut it into batches.

    Args:
        split: The split to batch.
        batch_size: Images per batch; the last batch may be smaller.
        shuffle_seed: Seed of the permutation.

    Returns:
        List of ImageBatch covering the split exactly once.

    Raises:
        ConfigurationError: If batch_size < 1.
    """
    if batch_size < 1:
        raise ConfigurationError(
            f"batch_size must be at least 1, got {batch_size}",
            details={"batch_size": batch_size}
        )
    generator = torch.Generator().manual_seed(shuffle_seed)
    order = torch.randperm(split.size, generator=generator).tolist()
    return [
        split.select(order[start:start + batch_size])
        for start in range(0, split.size, batch_size)
    ]


def iterate_epochs(split: ImageBatch, batch_size: int, seed: int) -> Iterator[ImageBatch]:
    """
    Endless stream of batches; epoch e is shuffled with seed + e, without replacement.
    """
    epoch = 0
    while True:
        logger.debug(f"Starting epoch {epoch} | batch_size={batch_size}")
        for batch in make_batches(split, batch_size, seed + epoch):
            yield batch
        epoch += 1
