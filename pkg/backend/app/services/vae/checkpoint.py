"""
Checkpoint directories:

    <dir>/metadata.json         architecture, provenance, seed, parameter hashes
    <dir>/tensors.safetensors   flat archive keyed encoder.* / decoder.* / reference_encoder.*

A checkpoint is written into a temporary sibling directory and renamed into
place, so a crash never leaves a half-written checkpoint behind.
"""

import json
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import ValidationError
from safetensors import SafetensorError
from safetensors.torch import load_file, save_file

from app.core.exceptions import ArtifactError, CheckpointError
from app.schemas.model import VAEArchitecture
from app.services.vae.model import ModelHandle
from app.services.vae.networks import Decoder, Encoder
from app.utils.file_handling import canonical_json, sha256_file

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
METADATA_FILE = "metadata.json"
TENSORS_FILE = "tensors.safetensors"


def checkpoint_tensors_hash(directory: Path) -> str:
    """sha256 of the tensor archive; what manifests record for input checkpoints."""
    return sha256_file(Path(directory) / TENSORS_FILE)


def save_checkpoint(model: ModelHandle, directory: Path, provenance: Optional[Dict[str, Any]] = None) -> Path:
    """
    Persist a model (with theta_0 when present).

    Args:
        model: Model to save.
        directory: Target checkpoint directory; replaced if it exists.
        provenance: Free-form training provenance (subcommand, step, config hash).

    Returns:
        The checkpoint directory.

    Raises:
        ArtifactError: If the directory cannot be written.
    """
    directory = Path(directory)
    tensors = {}
    hashes = {}
    for name, module in model.modules():
        for key, value in module.state_dict().items():
            tensors[f"{name}.{key}"] = value.detach().cpu().contiguous()
        hashes[name] = model.parameter_hash(name)

    metadata = {
        "format_version": FORMAT_VERSION,
        "architecture": model.architecture.to_dict(),
        "downsampling_factor": model.downsampling_factor,
        "latent_channels": model.latent_channels,
        "seed": model.seed,
        "frozen": dict(model.frozen),
        "has_reference": model.reference_encoder is not None,
        "parameter_hashes": hashes,
        "provenance": dict(provenance or {}),
    }

    staging: Optional[Path] = None
    try:
        directory.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(dir=directory.parent, prefix=f".{directory.name}.", suffix=".tmp"))
        save_file(tensors, str(staging / TENSORS_FILE))
        (staging / METADATA_FILE).write_text(canonical_json(metadata), encoding="utf-8")
        if directory.exists():
            shutil.rmtree(directory)
        os.replace(staging, directory)
        staging = None
    except (OSError, ValueError, SafetensorError) as e:
        raise ArtifactError(f"Failed to write checkpoint {directory}: {e}", details={"path": str(directory)})
    finally:
        # Left over only when the swap did not happen
        if staging is not None:
            shutil.rmtree(staging, ignore_errors=True)

    logger.info(f"Saved checkpoint | dir={directory} | tensors={len(tensors)} | reference={metadata['has_reference']}")
    return directory


def read_metadata(directory: Path) -> Dict[str, Any]:
    """
    Raises:
        CheckpointError: If the directory or its metadata is missing or unreadable.
    """
    directory = Path(directory)
    metadata_path = directory / METADATA_FILE
    if not directory.is_dir() or not metadata_path.is_file() or not (directory / TENSORS_FILE).is_file():
        raise CheckpointError(f"Not a checkpoint directory: {directory}", details={"path": str(directory)})
    try:
        return json.loads(metadata_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Unreadable checkpoint metadata: {e}", details={"path": str(metadata_path)})


def load_checkpoint(
    directory: Path,
    expected_architecture: Optional[VAEArchitecture] = None,
) -> Tuple[ModelHandle, Dict[str, Any]]:
    """
    Restore a model from a checkpoint directory.

    Args:
        directory: Checkpoint directory.
        expected_architecture: If given, the stored architecture must equal it.

    Returns:
        Tuple of (ModelHandle, metadata).

    Raises:
        CheckpointError: Missing files, a different architecture, or tensors
            that do not fit the architecture.
    """
    directory = Path(directory)
    metadata = read_metadata(directory)

    try:
        stored = metadata["architecture"]
        architecture = VAEArchitecture(
            in_channels=stored["in_channels"],
            encoder_channels=tuple(stored["encoder_channels"]),
            latent_channels=stored["latent_channels"],
        )
    except (KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"Checkpoint architecture is malformed: {e}", details={"path": str(directory)})

    if expected_architecture is not None and architecture != expected_architecture:
        raise CheckpointError(
            "Checkpoint architecture does not match the configured architecture",
            details={"checkpoint": architecture.to_dict(), "configured": expected_architecture.to_dict()}
        )

    try:
        tensors = load_file(str(directory / TENSORS_FILE))
    except (OSError, ValueError, SafetensorError) as e:
        raise CheckpointError(f"Unreadable tensor archive: {e}", details={"path": str(directory)})

    groups: Dict[str, Dict[str, Any]] = {}
    for key, value in tensors.items():
        component, _, parameter = key.partition(".")
        groups.setdefault(component, {})[parameter] = value

    unknown = sorted(set(groups) - {"encoder", "decoder", "reference_encoder"})
    if unknown or "encoder" not in groups or "decoder" not in groups:
        raise CheckpointError(
            "Checkpoint tensors are not keyed encoder.* / decoder.* / reference_encoder.*",
            details={"components": sorted(groups)}
        )

    encoder, decoder = Encoder(architecture), Decoder(architecture)
    reference = Encoder(architecture) if "reference_encoder" in groups else None
    try:
        encoder.load_state_dict(groups["encoder"], strict=True)
        decoder.load_state_dict(groups["decoder"], strict=True)
        if reference is not None:
            reference.load_state_dict(groups["reference_encoder"], strict=True)
    except RuntimeError as e:
        raise CheckpointError(f"Checkpoint tensors do not fit the architecture: {e}", details={"path": str(directory)})

    model = ModelHandle(architecture, encoder=encoder, decoder=decoder, reference_encoder=reference, seed=metadata.get("seed", 0))
    logger.info(f"Loaded checkpoint | dir={directory} | reference={reference is not None}")
    return model, metadata
