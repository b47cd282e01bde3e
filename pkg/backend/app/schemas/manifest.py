from typing import Any, Dict, List

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Provenance of one CLI invocation; exactly one per run."""

    subcommand: str
    tags: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    config_hash: str
    input_checkpoints: Dict[str, str] = Field(default_factory=dict, description="path -> sha256 of tensors")
    outputs: Dict[str, str] = Field(default_factory=dict, description="name -> path")
    seeds: Dict[str, int] = Field(default_factory=dict)
    summary: Dict[str, Any] = Field(default_factory=dict)
    started_at: str
    wall_clock_seconds: float = Field(default=0.0, ge=0.0)
    exit_code: int = 0
