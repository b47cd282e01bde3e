"""
End-to-end behavior of the trainer: freeze contracts, step logs, checkpoints and halts.
"""

import json

import pytest
import torch

from app.core.exceptions import TrainingHaltError
from app.schemas.attack import AttackBudget
from app.schemas.training import PretrainConfig, StepRecord, TrainConfig
from app.services.training import SRLTrainer, finetune, pretrain_baseline
from app.services.training.trainer import FINETUNE_LOG, HALT_RECORD, PRETRAIN_LOG
from app.services.vae import build_model
from app.services.vae.checkpoint import load_checkpoint
from app.utils.file_handling import read_csv


@pytest.fixture
def train_cfg():
    return TrainConfig(total_steps=3, batch_size=4, checkpoint_every=2, attack=AttackBudget(iterations=2))


def test_finetune_keeps_decoder_and_reference_fixed(tiny_model, make_images, extractor, train_cfg, tmp_path):
    data = make_images(6)
    decoder_before = tiny_model.parameter_hash("decoder")
    encoder_before = tiny_model.parameter_hash("encoder")

    result = SRLTrainer(tiny_model, tmp_path / "run", extractor).finetune(data, train_cfg)

    assert tiny_model.parameter_hash("decoder") == decoder_before
    assert result.decoder_hash == decoder_before
    assert result.reference_hash == encoder_before
    assert tiny_model.parameter_hash("reference_encoder") == encoder_before
    assert tiny_model.parameter_hash("encoder") != encoder_before
    assert result.run_tag == "srl"


def test_finetune_writes_step_log_and_checkpoints(tiny_model, make_images, extractor, train_cfg, tmp_path):
    out = tmp_path / "run"

    result = finetune(tiny_model, make_images(6), train_cfg, out, extractor)

    rows = read_csv(out / FINETUNE_LOG)
    assert [int(r["step"]) for r in rows] == [0, 1, 2]
    assert list(rows[0]) == list(StepRecord.CSV_HEADER)
    assert [p.name for p in result.checkpoints] == ["step_000002", "final"]
    assert result.records[0].orig == 0.0
    for record in result.records:
        expected = train_cfg.orig_weight * record.orig + record.mse_adv + train_cfg.lpips_weight * record.lpips_adv
        assert record.total == pytest.approx(expected, abs=1e-6)

    loaded, metadata = load_checkpoint(result.final_checkpoint, expected_architecture=tiny_model.architecture)
    assert metadata["provenance"]["run_tag"] == "srl"
    assert metadata["provenance"]["step"] == 3
    assert loaded.parameter_hash("reference_encoder") == result.reference_hash


def test_resumed_finetune_keeps_the_original_reference(tiny_model, make_images, extractor, train_cfg, tmp_path):
    data = make_images(6)
    first = finetune(tiny_model, data, train_cfg, tmp_path / "first", extractor)
    resumed, _ = load_checkpoint(first.final_checkpoint)

    second = finetune(resumed, data, train_cfg, tmp_path / "second", extractor)

    assert second.reference_hash == first.reference_hash
    assert second.records[0].orig > 0.0


def test_ablation_is_tagged(tiny_model, make_images, extractor, tmp_path):
    cfg = TrainConfig(total_steps=2, batch_size=4, orig_weight=0.0, attack=AttackBudget(iterations=1))

    result = finetune(tiny_model, make_images(4), cfg, tmp_path / "run", extractor)

    assert result.run_tag == "wo-originality"
    _, metadata = load_checkpoint(result.final_checkpoint)
    assert metadata["provenance"]["run_tag"] == "wo-originality"


def test_finetune_is_deterministic(tiny_architecture, make_images, extractor, train_cfg, tmp_path):
    data = make_images(6)
    runs = []
    for name in ("a", "b"):
        finetune(build_model(tiny_architecture, seed=0), data, train_cfg, tmp_path / name, extractor)
        runs.append((tmp_path / name / FINETUNE_LOG).read_bytes())

    assert runs[0] == runs[1]


# =============================================================================
# Baseline pretraining
# =============================================================================

def test_pretrain_writes_log_and_final_checkpoint(tiny_model, make_images, extractor, tmp_path):
    cfg = PretrainConfig(total_steps=3, batch_size=4, checkpoint_every=5)
    encoder_before = tiny_model.parameter_hash("encoder")
    decoder_before = tiny_model.parameter_hash("decoder")

    result = pretrain_baseline(tiny_model, make_images(6), cfg, tmp_path / "run", extractor)

    assert [p.name for p in result.checkpoints] == ["final"]
    assert len(read_csv(tmp_path / "run" / PRETRAIN_LOG)) == 3
    assert tiny_model.parameter_hash("encoder") != encoder_before
    assert tiny_model.parameter_hash("decoder") != decoder_before
    _, metadata = load_checkpoint(result.final_checkpoint)
    assert metadata["has_reference"] is False
    assert metadata["provenance"]["run_tag"] == "baseline"


def test_pretrain_is_deterministic(tiny_architecture, make_images, extractor, tmp_path):
    cfg = PretrainConfig(total_steps=3, batch_size=4)
    data = make_images(6)
    logs = []
    for name in ("a", "b"):
        pretrain_baseline(build_model(tiny_architecture, seed=0), data, cfg, tmp_path / name, extractor)
        logs.append((tmp_path / name / PRETRAIN_LOG).read_bytes())

    assert logs[0] == logs[1]


def test_non_finite_loss_halts_with_a_record(tiny_model, make_images, extractor, tmp_path, mocker):
    mocker.patch("app.services.training.trainer.kl_loss", return_value=torch.tensor(float("nan")))
    out = tmp_path / "run"

    with pytest.raises(TrainingHaltError):
        pretrain_baseline(tiny_model, make_images(4), PretrainConfig(total_steps=2, batch_size=4), out, extractor)

    halt = json.loads((out / HALT_RECORD).read_text(encoding="utf-8"))
    assert halt["reason"] == "non-finite loss"
    assert halt["record"]["step"] == 0
    assert not (out / "checkpoints").exists()


@pytest.mark.slow
def test_long_finetune_keeps_freeze_contracts(tiny_model, make_images, extractor, tmp_path):
    cfg = TrainConfig(total_steps=500, batch_size=8, checkpoint_every=250, attack=AttackBudget(iterations=3))
    decoder_before = tiny_model.parameter_hash("decoder")
    encoder_before = tiny_model.parameter_hash("encoder")

    result = finetune(tiny_model, make_images(32, seed=4), cfg, tmp_path / "run", extractor)

    assert len(result.records) == 500
    assert result.records[0].orig == 0.0
    assert tiny_model.parameter_hash("decoder") == decoder_before
    assert tiny_model.parameter_hash("reference_encoder") == encoder_before
    loaded, _ = load_checkpoint(result.final_checkpoint)
    assert loaded.parameter_hash("decoder") == decoder_before
    assert loaded.parameter_hash("reference_encoder") == encoder_before
