"""
Core configuration management using Pydantic Settings.
Loads process-level configuration from environment variables with validation,
and resolves flat TOML experiment files into validated ExperimentConfig objects.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ConfigurationError


class Settings(BaseSettings):
    """Process settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # =============================================================================
    # Artifacts
    # =============================================================================
    SRL_ARTIFACT_ROOT: str = Field(default="artifacts", description="Root directory for run artifacts")

    # =============================================================================
    # Compute
    # =============================================================================
    DEVICE: str = Field(default="cpu", description="Torch device: cpu or cuda")
    TORCH_NUM_THREADS: Optional[int] = Field(default=None, description="Pin torch intra-op threads")

    # =============================================================================
    # Logging
    # =============================================================================
    LOG_LEVEL: str = Field(default="INFO", description="Log level")
    LOG_FILE: Optional[str] = Field(default=None, description="Log file path (default: <artifact root>/logs/srl_lab.log)")
    LOG_ROTATION: str = Field(default="10 MB", description="Log rotation size")

    # =============================================================================
    # Validators
    # =============================================================================

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        if v not in ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]:
            raise ValueError("LOG_LEVEL must be DEBUG, INFO, WARNING, ERROR, or CRITICAL")
        return v

    @field_validator("DEVICE")
    @classmethod
    def validate_device(cls, v: str) -> str:
        """Validate torch device string."""
        if v != "cpu" and not v.startswith("cuda"):
            raise ValueError("DEVICE must be cpu or cuda[:index]")
        return v

    # =============================================================================
    # Helper Properties
    # =============================================================================

    @property
    def artifact_root(self) -> Path:
        """Artifact root as a Path."""
        return Path(self.SRL_ARTIFACT_ROOT)

    @property
    def runs_dir(self) -> Path:
        """Directory holding one subdirectory per CLI run."""
        return self.artifact_root / "runs"

    @property
    def manifest_ledger(self) -> Path:
        """Append-only ledger of run manifests."""
        return self.artifact_root / "manifests.jsonl"

    @property
    def results_ledger(self) -> Path:
        """Append-only CSV ledger of metric reports."""
        return self.artifact_root / "results_ledger.csv"

    @property
    def log_path(self) -> Path:
        """LOG_FILE, or logs/srl_lab.log under the artifact root."""
        return Path(self.LOG_FILE) if self.LOG_FILE else self.artifact_root / "logs" / "srl_lab.log"

    @property
    def log_rotation_bytes(self) -> int:
        """Rotation size in bytes ("10 MB" -> 10 * 1024 * 1024)."""
        return int(self.LOG_ROTATION.split()[0]) * 1024 * 1024


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.
    Uses lru_cache to ensure settings are loaded only once per process.
    """
    return Settings()


# =============================================================================
# Experiment configuration files
# =============================================================================

def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    Read a flat TOML experiment file.

    Args:
        path: Path to the TOML file, or None for an empty configuration.

    Returns:
        Mapping of key to value exactly as written in the file.

    Raises:
        ConfigurationError: If the file is missing, malformed or not flat.
    """
    if path is None:
        return {}

    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(
            f"Config file not found: {path}",
            details={"config_path": str(path)}
        )

    try:
        with open(config_path, "rb") as f:
            values = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(
            f"Config file is not valid TOML: {e}",
            details={"config_path": str(path)}
        )

    nested = [key for key, value in values.items() if isinstance(value, dict)]
    if nested:
        raise ConfigurationError(
            f"Config file must be flat; found table '{nested[0]}'",
            details={"config_path": str(path), "key": nested[0]}
        )
    return values


def resolve_experiment_config(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
):
    """
    Merge built-in defaults, file values and CLI overrides (in that precedence order).

    Args:
        config_path: Optional TOML file.
        overrides: Values from CLI flags; these win over the file.

    Returns:
        Tuple of (ExperimentConfig, file_values) so callers can tell which keys
        were set explicitly in the file.

    Raises:
        ConfigurationError: Naming the first unknown or invalid key.
    """
    # Imported here so app.schemas can import app.core without a cycle
    from app.schemas.experiment import ExperimentConfig

    file_values = load_config_file(config_path)
    merged = {**file_values, **dict(overrides or {})}

    unknown = sorted(set(merged) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigurationError(
            f"Unknown config key: {unknown[0]}",
            details={"key": unknown[0], "unknown_keys": unknown}
        )

    try:
        config = ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigurationError(
            f"Invalid config value for {key}: {first['msg']}",
            details={"key": key, "errors": e.errors(include_url=False)}
        )
    return config, file_values
