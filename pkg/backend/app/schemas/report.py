from typing import Any, ClassVar, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

PSNR_CAP_DB = 99.0

PROXY_LABELS = {
    "frechet": "rFID-proxy",
    "clip_proxy_cosine": "CLIP-proxy",
    "perceptual": "LPIPS-proxy",
}


class QualityMetrics(BaseModel):
    """Reconstruction quality of one input variant (clean or attacked) against the clean images."""

    model_config = ConfigDict(frozen=True)

    mse: float = Field(..., ge=0.0)
    psnr_db: float = Field(..., ge=0.0, le=PSNR_CAP_DB)
    ssim: float = Field(..., ge=-1.0, le=1.0)
    perceptual: float = Field(..., ge=0.0)
    # None when either set has fewer than two images
    frechet: Optional[float] = Field(default=None, ge=0.0)


class MetricReport(BaseModel):
    """
    Metrics for one (model, corpus, attack) triple.

    Proxies are labeled in `proxy_labels`; no value here is comparable with
    Inception-FID, VGG-LPIPS or CLIP numbers.
    """

    model_config = ConfigDict(frozen=True)

    CSV_PREFIXES: ClassVar[tuple] = ("clean", "attacked")

    corpus_id: str
    model_id: str
    sample_count: int = Field(..., ge=1)
    attack: Optional[Dict[str, Any]] = None
    proxy_labels: Dict[str, str] = Field(default_factory=lambda: dict(PROXY_LABELS))
    clean: QualityMetrics
    attacked: Optional[QualityMetrics] = None
    adv_mse: Optional[float] = Field(default=None, ge=0.0)
    poison_ratio: Optional[float] = Field(default=None, ge=0.0)
    clip_proxy_cosine: Optional[float] = Field(default=None, ge=-1.0, le=1.0)

    @field_validator("clip_proxy_cosine", mode="before")
    @classmethod
    def round_cosine(cls, v: Optional[float]) -> Optional[float]:
        """Clamp float noise just outside [-1, 1]."""
        if v is None:
            return v
        return max(-1.0, min(1.0, v))

    def ledger_row(self) -> Dict[str, Any]:
        """Flat single-row view for the CSV results ledger."""
        row: Dict[str, Any] = {
            "corpus_id": self.corpus_id,
            "model_id": self.model_id,
            "sample_count": self.sample_count,
            "attack_method": (self.attack or {}).get("method", ""),
            "attack_epsilon": (self.attack or {}).get("epsilon", ""),
            "adv_mse": self.adv_mse,
            "poison_ratio": self.poison_ratio,
            "clip_proxy_cosine": self.clip_proxy_cosine,
        }
        for prefix in self.CSV_PREFIXES:
            metrics = getattr(self, prefix)
            for name in QualityMetrics.model_fields:
                row[f"{prefix}_{name}"] = getattr(metrics, name) if metrics is not None else None
        return row
