"""
__Project__: SRL-VAE Lab
__Description__: Reconstruction Report Module that reconstructs a corpus from clean and (optionally) attacked inputs, aggregates every quality metric and proxy, and serializes the result as canonical JSON plus a results-ledger row.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import torch

from app.core.exceptions import DatasetError
from app.models.image_batch import ImageBatch
from app.models.outcomes import AttackOutcome
from app.schemas.report import MetricReport, QualityMetrics
from app.services.metrics.distribution import editing_similarity_proxy, frechet_feature_distance, pooled_features
from app.services.metrics.image_quality import batch_mean, per_image_mse, per_image_psnr, per_image_ssim
from app.services.vae.losses import perceptual_loss
from app.services.vae.model import ModelHandle
from app.services.vae.operations import reconstruct
from app.services.vae.perceptual import PerceptualExtractor, default_extractor
from app.utils.file_handling import append_csv_row, canonical_json, write_json


# =============================================================================
# MODULE CONFIGURATION
# =============================================================================

logger = logging.getLogger(__name__)

AttackFn = Callable[[ImageBatch], AttackOutcome]

MIN_FRECHET_SAMPLES = 2


# =============================================================================
# METRIC AGGREGATION
# =============================================================================

def quality_metrics(
    recon: torch.Tensor,
    clean: torch.Tensor,
    extractor: PerceptualExtractor,
    clean_features: Optional[np.ndarray] = None,
    batch_size: int = 64,
) -> QualityMetrics:
    """
    All reconstruction metrics of `recon` against `clean`.

    Args:
        recon: Reconstructions, (N, C, H, W).
        clean: Clean inputs of the same shape.
        extractor: Feature map for the perceptual and Frechet metrics.
        clean_features: Pooled features of `clean`, if already computed.
        batch_size: Feature extraction batch size.

    Returns:
        QualityMetrics: Batch means; Frechet over the whole set, or None
            for a single image.
    """
    mses = per_image_mse(recon, clean)
    with torch.no_grad():
        perceptual: List[float] = []
        for start in range(0, recon.shape[0], batch_size):
            stop = start + batch_size
            perceptual.extend(perceptual_loss(extractor, recon[start:stop], clean[start:stop], reduction="none").tolist())
    if clean_features is None:
        clean_features = pooled_features(extractor, clean, batch_size)
    frechet: Optional[float] = None
    if recon.shape[0] < MIN_FRECHET_SAMPLES or clean_features.shape[0] < MIN_FRECHET_SAMPLES:
        logger.warning(f"Skipping Frechet distance | samples={recon.shape[0]} | needed={MIN_FRECHET_SAMPLES}")
    else:
        frechet = frechet_feature_distance(pooled_features(extractor, recon, batch_size), clean_features)
    return QualityMetrics(
        mse=batch_mean(mses),
        psnr_db=batch_mean(per_image_psnr(recon, clean)),
        ssim=batch_mean(per_image_ssim(recon, clean)),
        perceptual=max(0.0, batch_mean(perceptual)),
        frechet=frechet,
    )


def _reconstruct_all(model: ModelHandle, corpus: ImageBatch, batch_size: int, attack: Optional[AttackFn]):
    clean_parts: List[torch.Tensor] = []
    attacked_parts: List[torch.Tensor] = []
    for chunk in corpus.chunks(batch_size):
        with torch.no_grad():
            clean_parts.append(reconstruct(model, chunk))
        if attack is not None:
            outcome = attack(chunk)
            with torch.no_grad():
                attacked_parts.append(reconstruct(model, outcome.x_adv))
    clean = torch.cat(clean_parts)
    attacked = torch.cat(attacked_parts) if attacked_parts else None
    return clean, attacked


# =============================================================================
# REPORT
# =============================================================================

def reconstruction_report(
    model: ModelHandle,
    corpus: ImageBatch,
    attack: Optional[AttackFn] = None,
    *,
    extractor: Optional[PerceptualExtractor] = None,
    corpus_id: str = "corpus",
    model_id: str = "model",
    attack_descriptor: Optional[Dict[str, Any]] = None,
    poison_ratio: Optional[float] = None,
    batch_size: int = 64,
) -> MetricReport:
    """
    Reconstruct a corpus and aggregate every metric.

    Clean reconstructions decode the latent mean of the clean input. With an
    attack, the attacked reconstructions decode the latent mean of x_adv and
    are scored against the clean input; the CLIP-proxy compares the two
    reconstruction sets.

    Args:
        model (ModelHandle): Model to evaluate.
        corpus (ImageBatch): Evaluation images.
        attack: Callable producing an AttackOutcome for one batch.
        extractor: Feature map; the seeded default when None.
        corpus_id: Identifier written to the report (e.g. split fingerprint).
        model_id: Identifier written to the report (e.g. checkpoint hash).
        attack_descriptor: Method and budget of the attack.
        poison_ratio: Reduction ratio of a poison probe run on the same corpus.
        batch_size: Evaluation batch size.

    Returns:
        MetricReport: Deterministic for fixed checkpoints, corpus and seeds.

    Raises:
        DatasetError: If the corpus is empty.
    """
    if corpus.size < 1:
        raise DatasetError("Cannot report on an empty corpus")
    extractor = extractor if extractor is not None else default_extractor(corpus.shape[1])
    x = corpus.pixels.detach()

    clean_recon, attacked_recon = _reconstruct_all(model, corpus, batch_size, attack)
    clean_features = pooled_features(extractor, x, batch_size)
    clean_metrics = quality_metrics(clean_recon, x, extractor, clean_features, batch_size)

    attacked_metrics = None
    cosine = None
    if attacked_recon is not None:
        attacked_metrics = quality_metrics(attacked_recon, x, extractor, clean_features, batch_size)
        cosine = editing_similarity_proxy(
            pooled_features(extractor, clean_recon, batch_size),
            pooled_features(extractor, attacked_recon, batch_size),
        )

    report = MetricReport(
        corpus_id=corpus_id,
        model_id=model_id,
        sample_count=corpus.size,
        attack=attack_descriptor,
        clean=clean_metrics,
        attacked=attacked_metrics,
        adv_mse=attacked_metrics.mse if attacked_metrics is not None else None,
        poison_ratio=poison_ratio,
        clip_proxy_cosine=cosine,
    )
    logger.info(
        f"Report | model={model_id[:12]} | corpus={corpus_id[:12]} | n={corpus.size} | "
        f"clean_psnr={clean_metrics.psnr_db:.3f} | clean_ssim={clean_metrics.ssim:.4f} | "
        f"adv_mse={report.adv_mse if report.adv_mse is not None else 'n/a'}"
    )
    return report


def report_json(report: MetricReport) -> str:
    """Canonical JSON bytes of a report."""
    return canonical_json(report.model_dump(mode="json"))


def save_report(report: MetricReport, path: Path, ledger_path: Optional[Path] = None) -> Path:
    """Write the report JSON atomically and append one row to the results ledger."""
    write_json(path, report.model_dump(mode="json"))
    if ledger_path is not None:
        append_csv_row(ledger_path, report.ledger_row())
    return Path(path)
