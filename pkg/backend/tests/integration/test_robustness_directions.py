"""
Directional claims of SRL fine-tuning on a seeded synthetic corpus.

One baseline is pretrained per module and every fine-tune starts from it.
Absolute numbers are desk-scale; each test asserts an ordering only.
"""

from pathlib import Path
from typing import Dict

import pytest
import torch

from app.models.image_batch import ImageBatch
from app.schemas.attack import AttackBudget
from app.schemas.model import VAEArchitecture
from app.schemas.training import PretrainConfig, TrainConfig
from app.services.analysis import cluster_tightness, mean_smoothness
from app.services.attacks import encoder_targeted_attack, pgd_reconstruction_attack, poison_crafting_probe, target_batch
from app.services.metrics import reconstruction_report
from app.services.training import finetune, originality_loss, pretrain_baseline
from app.services.vae import build_model, default_extractor, encode, encode_reference, perceptual_loss, reconstruct
from app.services.vae.checkpoint import load_checkpoint
from app.services.vae.model import ModelHandle
from tests.conftest import make_batch

pytestmark = pytest.mark.slow

ARCHITECTURE = VAEArchitecture(in_channels=3, encoder_channels=(16, 32, 32), latent_channels=4)
PRETRAIN = PretrainConfig(total_steps=600, batch_size=32, learning_rate=1e-3)
FINETUNE = TrainConfig(
    total_steps=300,
    batch_size=16,
    learning_rate=3e-4,
    attack=AttackBudget(epsilon=8 / 255, step_size=2 / 255, iterations=5, init="uniform"),
    checkpoint_every=1000,
)
RECON_ATTACK = AttackBudget(epsilon=8 / 255, step_size=2 / 255, iterations=10)
ENCODER_ATTACK = AttackBudget(epsilon=16 / 255, step_size=2 / 255, iterations=10)


# =============================================================================
# Fixtures
# =============================================================================

@pytest.fixture(scope="module")
def corpus() -> Dict[str, ImageBatch]:
    images = make_batch(320, size=32, seed=11)
    return {"train": images.head(256), "probe": images.select(range(256, 320))}


@pytest.fixture(scope="module")
def features():
    return default_extractor(3, 0)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("directions")


@pytest.fixture(scope="module")
def baseline_checkpoint(corpus, features, workdir) -> Path:
    result = pretrain_baseline(build_model(ARCHITECTURE, seed=0), corpus["train"], PRETRAIN, workdir / "baseline", features)
    return result.final_checkpoint


@pytest.fixture(scope="module")
def trained(corpus, features, workdir, baseline_checkpoint):
    """orig_weight -> final fine-tuned checkpoint, trained on first use."""
    cache: Dict[float, Path] = {}

    def get(orig_weight: float) -> ModelHandle:
        if orig_weight not in cache:
            model, _ = load_checkpoint(baseline_checkpoint)
            cfg = FINETUNE.model_copy(update={"orig_weight": orig_weight})
            cache[orig_weight] = finetune(model, corpus["train"], cfg, workdir / f"srl_{orig_weight}", features).final_checkpoint
        model, _ = load_checkpoint(cache[orig_weight])
        return model

    return get


@pytest.fixture
def baseline_model(baseline_checkpoint) -> ModelHandle:
    model, _ = load_checkpoint(baseline_checkpoint)
    return model


# =============================================================================
# Helpers
# =============================================================================

def _mse(model: ModelHandle, x: torch.Tensor, clean: torch.Tensor) -> float:
    with torch.no_grad():
        return float(((reconstruct(model, x) - clean) ** 2).mean())


def _adversarial_mse(model: ModelHandle, probe: ImageBatch, features) -> float:
    outcome = pgd_reconstruction_attack(model, probe, RECON_ATTACK, extractor=features)
    return _mse(model, outcome.x_adv.pixels, probe.pixels)


def _encoder_attack(model: ModelHandle):
    def attack(chunk: ImageBatch):
        with torch.no_grad():
            z_targ = encode(model, target_batch(chunk, "gray")).mu
        return encoder_targeted_attack(model, chunk, z_targ, ENCODER_ATTACK)
    return attack


def _drift(model: ModelHandle, probe: ImageBatch) -> float:
    with torch.no_grad():
        return float(originality_loss(encode(model, probe), encode_reference(model, probe)))


# =============================================================================
# Baseline pretraining
# =============================================================================

def test_pretraining_beats_the_mean_image(corpus, baseline_model):
    probe = corpus["probe"].pixels
    mean_image = corpus["train"].pixels.mean(dim=0, keepdim=True)
    constant_mse = float(((probe - mean_image) ** 2).mean())

    assert _mse(baseline_model, probe, probe) < constant_mse


def test_kl_weight_only_trades_off_reconstruction(corpus, features, workdir):
    short = PRETRAIN.model_copy(update={"total_steps": 300})
    mses = {}
    for kl_weight in (0.0, 1e-6):
        model = build_model(ARCHITECTURE, seed=0)
        cfg = short.model_copy(update={"kl_weight": kl_weight})
        pretrain_baseline(model, corpus["train"], cfg, workdir / f"kl_{kl_weight}", features)
        mses[kl_weight] = _mse(model, corpus["probe"].pixels, corpus["probe"].pixels)

    assert mses[0.0] <= mses[1e-6] * 1.05


def test_encoder_attack_does_not_improve_reconstruction(corpus, features, baseline_model):
    probe = corpus["probe"]
    outcome = _encoder_attack(baseline_model)(probe)

    with torch.no_grad():
        clean = perceptual_loss(features, reconstruct(baseline_model, probe), probe.pixels, reduction="none")
        attacked = perceptual_loss(features, reconstruct(baseline_model, outcome.x_adv), probe.pixels, reduction="none")

    assert float((attacked >= clean).float().mean()) >= 0.9


# =============================================================================
# Fine-tuning
# =============================================================================

def test_reconstruction_only_finetune_does_not_degrade(corpus, features, workdir, baseline_checkpoint):
    model, _ = load_checkpoint(baseline_checkpoint)
    train = corpus["train"]
    before = _mse(model, train.pixels, train.pixels)
    cfg = FINETUNE.model_copy(update={"total_steps": 200, "orig_weight": 0.0, "attack": AttackBudget(iterations=0)})

    finetune(model, train, cfg, workdir / "sanity", features)

    assert _mse(model, train.pixels, train.pixels) <= before * 1.05


def test_srl_lowers_adversarial_reconstruction_error(corpus, features, trained, baseline_model):
    srl = trained(FINETUNE.orig_weight)
    probe = corpus["probe"]

    assert _adversarial_mse(srl, probe, features) < _adversarial_mse(baseline_model, probe, features)


def test_originality_term_limits_encoder_drift(corpus, trained):
    probe = corpus["probe"]

    assert _drift(trained(0.0), probe) >= 2.0 * _drift(trained(FINETUNE.orig_weight), probe)


def test_smaller_orig_weight_gives_better_attacked_psnr(corpus, features, trained):
    probe = corpus["probe"]
    psnr = {}
    for orig_weight in (0.1, 0.01, 0.001):
        model = trained(orig_weight)
        report = reconstruction_report(model, probe, _encoder_attack(model), extractor=features)
        psnr[orig_weight] = report.attacked.psnr_db

    assert psnr[0.1] < psnr[0.01] < psnr[0.001]


@pytest.mark.parametrize("epsilon", [2 / 255, 4 / 255, 8 / 255, 15 / 255])
def test_srl_resists_poison_crafting(corpus, trained, baseline_model, epsilon):
    probe = corpus["probe"]
    budget = AttackBudget(epsilon=epsilon, step_size=epsilon / 4, iterations=10)

    srl_ratio = poison_crafting_probe(trained(FINETUNE.orig_weight), probe, probe.rolled(1), budget).reduction_ratio
    base_ratio = poison_crafting_probe(baseline_model, probe, probe.rolled(1), budget).reduction_ratio

    assert srl_ratio > base_ratio


def test_srl_smooths_the_latent_space(corpus, trained, baseline_model):
    probe = corpus["probe"]
    anchors = probe.head(16)
    srl = trained(FINETUNE.orig_weight)

    srl_smoothness, _ = mean_smoothness(srl, anchors, 8 / 255, 10, seed=0)
    base_smoothness, _ = mean_smoothness(baseline_model, anchors, 8 / 255, 10, seed=0)
    srl_tightness = cluster_tightness(srl, probe, 8 / 255, seed=0)
    base_tightness = cluster_tightness(baseline_model, probe, 8 / 255, seed=0)

    assert srl_smoothness < base_smoothness
    assert srl_tightness.tightness_ratio < base_tightness.tightness_ratio
