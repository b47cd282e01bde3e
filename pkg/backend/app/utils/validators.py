"""
Validation helpers shared by schemas, services and the CLI.
"""

from fractions import Fraction
from typing import Any, Sequence

import torch

from app.core.exceptions import ShapeError


def parse_fraction(value: Any) -> float:
    """
    Parse a pixel-unit real written either as a number or as a fraction string.

    Args:
        value: 0.03, "0.03" or "8/255".

    Returns:
        The value as a float.

    Raises:
        ValueError: If the value cannot be parsed.

    Example:
        >>> parse_fraction("8/255")
        0.03137254901960784
    """
    if isinstance(value, bool):
        raise ValueError(f"Expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    raise ValueError(f"Expected a number or fraction string, got {value!r}")


def require_same_shape(a: torch.Tensor, b: torch.Tensor, what: str = "inputs") -> None:
    """Raise ShapeError unless both tensors have the same shape."""
    if tuple(a.shape) != tuple(b.shape):
        raise ShapeError(
            f"Shape mismatch between {what}: {tuple(a.shape)} vs {tuple(b.shape)}",
            details={"shape_a": list(a.shape), "shape_b": list(b.shape)}
        )


def require_divisible(spatial: Sequence[int], factor: int) -> None:
    """Raise ShapeError naming the first spatial dimension not divisible by factor."""
    for name, size in zip(("height", "width"), spatial):
        if size % factor != 0:
            raise ShapeError(
                f"Image {name} {size} is not divisible by the downsampling factor {factor}",
                details={"dimension": name, "size": size, "factor": factor}
            )
