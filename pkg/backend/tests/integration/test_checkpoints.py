"""
Checkpoint directories: round trip, architecture checks and atomic replacement.
"""

import json

import pytest
import torch
from safetensors import SafetensorError

from app.core.exceptions import ArtifactError, CheckpointError
from app.schemas.model import VAEArchitecture
from app.services.vae import encode
from app.services.vae.checkpoint import (
    METADATA_FILE,
    TENSORS_FILE,
    checkpoint_tensors_hash,
    load_checkpoint,
    read_metadata,
    save_checkpoint,
)


def test_round_trip_preserves_every_component(tiny_model, batch, tmp_path):
    tiny_model.snapshot_reference()
    directory = save_checkpoint(tiny_model, tmp_path / "ckpt", {"subcommand": "finetune", "step": 3})

    loaded, metadata = load_checkpoint(directory, expected_architecture=tiny_model.architecture)

    for component in ("encoder", "decoder", "reference_encoder"):
        assert loaded.parameter_hash(component) == tiny_model.parameter_hash(component)
        assert metadata["parameter_hashes"][component] == tiny_model.parameter_hash(component)
    assert metadata["has_reference"] is True
    assert metadata["provenance"] == {"subcommand": "finetune", "step": 3}
    assert metadata["downsampling_factor"] == 8
    with torch.no_grad():
        assert torch.equal(encode(loaded, batch).mu, encode(tiny_model, batch).mu)


def test_checkpoint_without_reference(tiny_model, tmp_path):
    loaded, metadata = load_checkpoint(save_checkpoint(tiny_model, tmp_path / "ckpt"))

    assert metadata["has_reference"] is False
    assert loaded.reference_encoder is None


def test_architecture_mismatch_is_refused(tiny_model, tmp_path):
    directory = save_checkpoint(tiny_model, tmp_path / "ckpt")
    other = VAEArchitecture(in_channels=3, encoder_channels=(8, 16, 16), latent_channels=8)

    with pytest.raises(CheckpointError):
        load_checkpoint(directory, expected_architecture=other)


def test_missing_or_broken_checkpoints(tiny_model, tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nowhere")

    directory = save_checkpoint(tiny_model, tmp_path / "ckpt")
    (directory / TENSORS_FILE).write_bytes(b"not a tensor archive")
    with pytest.raises(CheckpointError):
        load_checkpoint(directory)

    (directory / METADATA_FILE).write_text("{", encoding="utf-8")
    with pytest.raises(CheckpointError):
        read_metadata(directory)


def test_overwrite_replaces_atomically(tiny_model, tmp_path):
    directory = tmp_path / "ckpt"
    save_checkpoint(tiny_model, directory)
    first_hash = checkpoint_tensors_hash(directory)

    with torch.no_grad():
        next(tiny_model.encoder.parameters()).add_(1.0)
    save_checkpoint(tiny_model, directory)

    assert checkpoint_tensors_hash(directory) != first_hash
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".")] == []
    metadata = json.loads((directory / METADATA_FILE).read_text(encoding="utf-8"))
    assert metadata["parameter_hashes"]["encoder"] == tiny_model.parameter_hash("encoder")


def test_saving_twice_gives_identical_tensor_bytes(tiny_model, tmp_path):
    save_checkpoint(tiny_model, tmp_path / "a")
    save_checkpoint(tiny_model, tmp_path / "b")

    assert checkpoint_tensors_hash(tmp_path / "a") == checkpoint_tensors_hash(tmp_path / "b")


def test_failed_save_keeps_the_old_checkpoint_and_cleans_up(tiny_model, tmp_path, mocker):
    directory = tmp_path / "ckpt"
    save_checkpoint(tiny_model, directory)
    before = checkpoint_tensors_hash(directory)
    mocker.patch("app.services.vae.checkpoint.save_file", side_effect=SafetensorError("disk full"))

    with pytest.raises(ArtifactError):
        save_checkpoint(tiny_model, directory)

    assert checkpoint_tensors_hash(directory) == before
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".")] == []
