"""
__Project__: SRL-VAE Lab
__Description__: SRL Trainer Module that owns parameter mutation: baseline VAE pretraining on reconstruction, perceptual and KL losses, and the SRL min-max encoder fine-tune with a frozen decoder and a frozen reference encoder.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import torch

from app.core.exceptions import ArtifactError, TrainingHaltError
from app.models.image_batch import ImageBatch
from app.schemas.training import PretrainConfig, PretrainRecord, StepRecord, TrainConfig
from app.services.data.batching import iterate_epochs
from app.services.training.objectives import ablation_total_loss, srl_total_loss
from app.services.vae.checkpoint import save_checkpoint
from app.services.vae.losses import kl_loss, perceptual_loss, reconstruction_loss
from app.services.vae.model import ModelHandle
from app.services.vae.operations import decode, encode, sample_latent
from app.services.vae.perceptual import PerceptualExtractor, default_extractor
from app.utils.file_handling import write_csv, write_json


# =============================================================================
# MODULE CONFIGURATION
# =============================================================================

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
FINETUNE_LOG = "steps.csv"
PRETRAIN_LOG = "pretrain_steps.csv"
HALT_RECORD = "halt_record.json"


# =============================================================================
# DATA CLASSES
# =============================================================================

@dataclass
class FinetuneResult:
    """Outcome of one SRL fine-tune."""

    run_tag: str
    records: List[StepRecord]
    checkpoints: List[Path]
    log_path: Path
    decoder_hash: str
    reference_hash: str

    @property
    def final_checkpoint(self) -> Path:
        return self.checkpoints[-1]

    def to_dict(self) -> Dict[str, Any]:
        last = self.records[-1]
        return {
            "run_tag": self.run_tag,
            "steps": len(self.records),
            "final_total": last.total,
            "final_orig": last.orig,
            "final_mse_adv": last.mse_adv,
            "final_lpips_adv": last.lpips_adv,
            "decoder_hash": self.decoder_hash,
            "reference_hash": self.reference_hash,
            "checkpoints": [str(p) for p in self.checkpoints],
            "log": str(self.log_path),
        }


@dataclass
class PretrainResult:
    """Outcome of baseline pretraining."""

    records: List[PretrainRecord]
    checkpoints: List[Path]
    log_path: Path
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def final_checkpoint(self) -> Path:
        return self.checkpoints[-1]

    def to_dict(self) -> Dict[str, Any]:
        last = self.records[-1]
        return {
            "steps": len(self.records),
            "final_total": last.total,
            "final_rec": last.rec,
            "final_kl": last.kl,
            "checkpoints": [str(p) for p in self.checkpoints],
            "log": str(self.log_path),
            **self.extra,
        }


# =============================================================================
# SRL TRAINER CLASS
# =============================================================================

class SRLTrainer:
    """
    SRL Trainer Class.

    Runs the optimization loops on one ModelHandle and writes step logs and
    checkpoints under output_dir:

        <output_dir>/steps.csv or pretrain_steps.csv
        <output_dir>/checkpoints/step_000100/ ... checkpoints/final/

    Attributes:
        model (ModelHandle): The VAE being trained.
        extractor (PerceptualExtractor): Feature map of the perceptual loss.
        output_dir (Path): Where logs and checkpoints go.
        provenance (dict): Extra provenance stored in every checkpoint.

    Example:
        >>> trainer = SRLTrainer(model, output_dir=Path("artifacts/runs/finetune-..."))
        >>> result = trainer.finetune(splits.train, config.train_config())
        >>> result.final_checkpoint
        PosixPath('artifacts/runs/finetune-.../checkpoints/final')
    """

    # -------------------------------------------------------------------------
    # INITIALIZATION
    # -------------------------------------------------------------------------

    def __init__(
        self,
        model: ModelHandle,
        output_dir: Path,
        extractor: Optional[PerceptualExtractor] = None,
        provenance: Optional[Dict[str, Any]] = None,
    ):
        self.model = model
        self.output_dir = Path(output_dir)
        self.extractor = extractor if extractor is not None else default_extractor(
            model.architecture.in_channels, dtype=model.dtype
        )
        self.provenance = dict(provenance or {})

    # -------------------------------------------------------------------------
    # CHECKPOINTS AND HALTS
    # -------------------------------------------------------------------------

    def _checkpoint(self, name: str, subcommand: str, step: int, extra: Dict[str, Any]) -> Path:
        provenance = {**self.provenance, "subcommand": subcommand, "step": step, **extra}
        try:
            return save_checkpoint(self.model, self.output_dir / "checkpoints" / name, provenance)
        except ArtifactError as e:
            raise TrainingHaltError(
                f"Checkpoint write failed at step {step}: {e.message}",
                details={"step": step, **e.details}
            )

    def _halt(self, reason: str, record: Dict[str, Any], header, rows) -> None:
        """Dump the failing step and the log so far, then raise."""
        safe = {k: (v if not isinstance(v, float) or math.isfinite(v) else repr(v)) for k, v in record.items()}
        write_json(self.output_dir / HALT_RECORD, {"reason": reason, "record": safe})
        if rows:
            write_csv(self.output_dir / (FINETUNE_LOG if "orig" in header else PRETRAIN_LOG), header, rows)
        logger.error(f"Training halted | reason={reason} | step={record.get('step')}")
        raise TrainingHaltError(f"Training halted at step {record.get('step')}: {reason}", details=safe)

    # -------------------------------------------------------------------------
    # SRL FINE-TUNE
    # -------------------------------------------------------------------------

    def finetune(self, data: ImageBatch, cfg: TrainConfig) -> FinetuneResult:
        """
        Min-max fine-tune of the encoder against the reconstruction attack.

        theta_0 is snapshotted from the current encoder when the model has
        none; the decoder is frozen; only encoder parameters reach AdamW.
        When orig_weight is 0 the ablation objective runs instead.

        Args:
            data (ImageBatch): Training split.
            cfg (TrainConfig): Fine-tune configuration.

        Returns:
            FinetuneResult: Step records, checkpoint paths and the freeze hashes.

        Raises:
            TrainingHaltError: On a non-finite loss, a failed checkpoint write,
                or a changed decoder / reference hash.
        """
        model = self.model
        model.snapshot_reference()
        model.freeze("decoder")
        model.unfreeze("encoder")
        decoder_hash = model.parameter_hash("decoder")
        reference_hash = model.parameter_hash("reference_encoder")

        parameters = list(model.encoder.parameters())
        optimizer = torch.optim.AdamW(
            parameters, lr=cfg.learning_rate, betas=ADAM_BETAS, weight_decay=cfg.weight_decay
        )
        loss_fn = ablation_total_loss if cfg.is_ablation else srl_total_loss
        batches = iterate_epochs(data, cfg.batch_size, cfg.seed)
        tag = {"run_tag": cfg.run_tag}

        logger.info(
            f"Starting fine-tune | tag={cfg.run_tag} | steps={cfg.total_steps} | batch={cfg.batch_size} | "
            f"lr={cfg.learning_rate} | orig_weight={cfg.orig_weight} | lpips_weight={cfg.lpips_weight} | "
            f"eps={cfg.attack.epsilon:.5f} | iterations={cfg.attack.iterations}"
        )

        records: List[StepRecord] = []
        rows: List[tuple] = []
        checkpoints: List[Path] = []

        for step in range(cfg.total_steps):
            batch = next(batches)
            breakdown = loss_fn(model, batch, cfg, cfg.seed + step, self.extractor)
            components = breakdown.components()

            optimizer.zero_grad(set_to_none=True)
            if math.isfinite(components["total"]):
                breakdown.total.backward()
                grad_norm = float(torch.nn.utils.clip_grad_norm_(parameters, max_norm=float("inf")))
            else:
                grad_norm = float("nan")

            record = StepRecord(
                step=step,
                grad_norm=grad_norm,
                orig_weight=cfg.orig_weight,
                lpips_weight=cfg.lpips_weight,
                **components,
            )
            if not math.isfinite(record.total) or not math.isfinite(grad_norm):
                self._halt("non-finite loss", record.model_dump(), StepRecord.CSV_HEADER, rows)

            optimizer.step()
            records.append(record)
            rows.append(record.csv_row())

            if step % 50 == 0 or step == cfg.total_steps - 1:
                logger.info(
                    f"Step {step} | total={record.total:.6f} | orig={record.orig:.6f} | "
                    f"mse_adv={record.mse_adv:.6f} | lpips_adv={record.lpips_adv:.6f} | "
                    f"grad_norm={grad_norm:.4f} | attack_gain={record.attack_gain:.6f}"
                )
            if (step + 1) % cfg.checkpoint_every == 0 and step + 1 < cfg.total_steps:
                checkpoints.append(self._checkpoint(f"step_{step + 1:06d}", "finetune", step + 1, tag))
                write_csv(self.output_dir / FINETUNE_LOG, StepRecord.CSV_HEADER, rows)

        checkpoints.append(self._checkpoint("final", "finetune", cfg.total_steps, tag))
        log_path = write_csv(self.output_dir / FINETUNE_LOG, StepRecord.CSV_HEADER, rows)

        if model.parameter_hash("decoder") != decoder_hash:
            raise TrainingHaltError("Decoder parameters changed during fine-tuning", details={"before": decoder_hash})
        if model.parameter_hash("reference_encoder") != reference_hash:
            raise TrainingHaltError("Reference encoder changed during fine-tuning", details={"before": reference_hash})

        logger.info(f"Fine-tune complete | tag={cfg.run_tag} | steps={cfg.total_steps} | final_total={records[-1].total:.6f}")
        return FinetuneResult(
            run_tag=cfg.run_tag,
            records=records,
            checkpoints=checkpoints,
            log_path=log_path,
            decoder_hash=decoder_hash,
            reference_hash=reference_hash,
        )

    # -------------------------------------------------------------------------
    # BASELINE PRETRAINING
    # -------------------------------------------------------------------------

    def pretrain_baseline(self, data: ImageBatch, cfg: PretrainConfig) -> PretrainResult:
        """
        Train encoder and decoder jointly on rec + lpips_weight * LPIPS + kl_weight * KL.

        Args:
            data (ImageBatch): Training split.
            cfg (PretrainConfig): Pretraining configuration.

        Returns:
            PretrainResult: Step records and checkpoints; the final checkpoint
            is the one later snapshotted as theta_0.

        Raises:
            TrainingHaltError: On a non-finite loss or when the loss exceeds
                divergence_factor times its first value.
        """
        model = self.model
        model.unfreeze("encoder")
        model.unfreeze("decoder")
        parameters = list(model.encoder.parameters()) + list(model.decoder.parameters())
        optimizer = torch.optim.AdamW(
            parameters, lr=cfg.learning_rate, betas=ADAM_BETAS, weight_decay=cfg.weight_decay
        )
        batches = iterate_epochs(data, cfg.batch_size, cfg.seed)
        tag = {"run_tag": "baseline"}

        logger.info(
            f"Starting pretraining | steps={cfg.total_steps} | batch={cfg.batch_size} | lr={cfg.learning_rate} | "
            f"reconstruction={cfg.reconstruction} | kl_weight={cfg.kl_weight} | lpips_weight={cfg.lpips_weight}"
        )

        records: List[PretrainRecord] = []
        rows: List[tuple] = []
        checkpoints: List[Path] = []
        initial_total: Optional[float] = None

        for step in range(cfg.total_steps):
            batch = next(batches)
            dist = encode(model, batch)
            recon = decode(model, sample_latent(dist, cfg.seed + step))
            rec = reconstruction_loss(recon, batch.pixels, cfg.reconstruction)
            lpips = perceptual_loss(self.extractor, recon, batch.pixels)
            kl = kl_loss(dist)
            total = rec + cfg.lpips_weight * lpips + cfg.kl_weight * kl
            total_value = float(total.detach())

            optimizer.zero_grad(set_to_none=True)
            if math.isfinite(total_value):
                total.backward()
                grad_norm = float(torch.nn.utils.clip_grad_norm_(parameters, max_norm=float("inf")))
            else:
                grad_norm = float("nan")

            record = PretrainRecord(
                step=step,
                total=total_value,
                rec=float(rec.detach()),
                lpips=float(lpips.detach()),
                kl=float(kl.detach()),
                grad_norm=grad_norm,
            )
            if not math.isfinite(total_value) or not math.isfinite(grad_norm):
                self._halt("non-finite loss", record.model_dump(), PretrainRecord.CSV_HEADER, rows)
            if initial_total is None:
                initial_total = total_value
            elif total_value > cfg.divergence_factor * initial_total:
                self._halt(
                    f"loss {total_value:.6g} exceeds {cfg.divergence_factor}x the initial {initial_total:.6g}",
                    record.model_dump(), PretrainRecord.CSV_HEADER, rows
                )

            optimizer.step()
            records.append(record)
            rows.append(record.csv_row())

            if step % 50 == 0 or step == cfg.total_steps - 1:
                logger.info(
                    f"Step {step} | total={total_value:.6f} | rec={record.rec:.6f} | "
                    f"lpips={record.lpips:.6f} | kl={record.kl:.4f} | grad_norm={grad_norm:.4f}"
                )
            if (step + 1) % cfg.checkpoint_every == 0 and step + 1 < cfg.total_steps:
                checkpoints.append(self._checkpoint(f"step_{step + 1:06d}", "pretrain", step + 1, tag))
                write_csv(self.output_dir / PRETRAIN_LOG, PretrainRecord.CSV_HEADER, rows)

        checkpoints.append(self._checkpoint("final", "pretrain", cfg.total_steps, tag))
        log_path = write_csv(self.output_dir / PRETRAIN_LOG, PretrainRecord.CSV_HEADER, rows)
        logger.info(f"Pretraining complete | steps={cfg.total_steps} | final_total={records[-1].total:.6f}")
        return PretrainResult(records=records, checkpoints=checkpoints, log_path=log_path)


# =============================================================================
# FUNCTIONAL ENTRY POINTS
# =============================================================================

def finetune(
    model: ModelHandle,
    data: ImageBatch,
    cfg: TrainConfig,
    output_dir: Path,
    extractor: Optional[PerceptualExtractor] = None,
) -> FinetuneResult:
    """SRL fine-tune with a one-off trainer."""
    return SRLTrainer(model, output_dir, extractor).finetune(data, cfg)


def pretrain_baseline(
    model: ModelHandle,
    data: ImageBatch,
    cfg: PretrainConfig,
    output_dir: Path,
    extractor: Optional[PerceptualExtractor] = None,
) -> PretrainResult:
    """Baseline pretraining with a one-off trainer."""
    return SRLTrainer(model, output_dir, extractor).pretrain_baseline(data, cfg)
