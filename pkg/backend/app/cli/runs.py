"""
Run bookkeeping: one directory and exactly one manifest per CLI invocation.

    <artifact root>/runs/<subcommand>-<UTC timestamp>-<config hash[:8]>/manifest.json
    <artifact root>/manifests.jsonl   (append-only copy of every manifest)
"""

import logging
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from pydantic import ValidationError

from app.core.config import get_settings
from app.core.exceptions import ConfigurationError
from app.schemas.experiment import ExperimentConfig
from app.schemas.manifest import RunManifest
from app.services.vae.checkpoint import checkpoint_tensors_hash
from app.utils.file_handling import append_jsonl, canonical_json, sha256_text, write_json

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical JSON of the resolved configuration."""
    return sha256_text(canonical_json(config.snapshot()))


def new_run_dir(subcommand: str, digest: str, run_dir: Optional[str] = None) -> Path:
    """Create the run directory; a pinned --run-dir is reused as is."""
    if run_dir is not None:
        path = Path(run_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    base = get_settings().runs_dir / f"{subcommand}-{stamp}-{digest[:8]}"
    path, suffix = base, 1
    while path.exists():
        path = base.with_name(f"{base.name}-{suffix}")
        suffix += 1
    path.mkdir(parents=True)
    return path


class RunContext:
    """Collects what a subcommand read and wrote; becomes the RunManifest."""

    def __init__(self, subcommand: str, config: ExperimentConfig, run_dir: Path):
        self.subcommand = subcommand
        self.config = config
        self.config_hash = config_hash(config)
        self.run_dir = run_dir
        self.started_at = datetime.now(timezone.utc).isoformat()
        self._started = time.monotonic()
        self.tags: List[str] = []
        self.input_checkpoints: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self.seeds: Dict[str, int] = {
            "split_seed": config.split_seed,
            "model_seed": config.model_seed,
            "extractor_seed": config.extractor_seed,
            "seed": config.seed,
            "attack_seed": config.attack_seed,
        }
        self.summary: Dict[str, Any] = {}

    def path(self, *parts: str) -> Path:
        return self.run_dir.joinpath(*parts)

    def add_checkpoint(self, directory: Path) -> str:
        """Record an input checkpoint by the hash of its tensors."""
        digest = checkpoint_tensors_hash(directory)
        self.input_checkpoints[str(directory)] = digest
        return digest

    def add_output(self, name: str, path: Path) -> Path:
        self.outputs[name] = str(path)
        return path

    def manifest(self, exit_code: int) -> RunManifest:
        return RunManifest(
            subcommand=self.subcommand,
            tags=self.tags,
            config=self.config.snapshot(),
            config_hash=self.config_hash,
            input_checkpoints=self.input_checkpoints,
            outputs=self.outputs,
            seeds=self.seeds,
            summary=self.summary,
            started_at=self.started_at,
            wall_clock_seconds=round(time.monotonic() - self._started, 3),
            exit_code=exit_code,
        )

    def finish(self, exit_code: int) -> RunManifest:
        """Write manifest.json into the run directory and append it to the ledger."""
        manifest = self.manifest(exit_code)
        data = manifest.model_dump(mode="json")
        write_json(self.path(MANIFEST_FILE), data)
        append_jsonl(get_settings().manifest_ledger, data)
        logger.info(f"Run finished | subcommand={self.subcommand} | exit_code={exit_code} | dir={self.run_dir}")
        return manifest


def record_rejected_run(subcommand: str, raw_config: Dict[str, Any], message: str,
                        run_dir: Optional[str] = None) -> RunManifest:
    """
    Manifest for a run whose configuration never resolved.

    The config section holds the raw values that were given; the run still gets
    its directory and exactly one ledger entry, with exit code 2.
    """
    digest = sha256_text(canonical_json(raw_config))
    path = new_run_dir(subcommand, digest, run_dir)
    manifest = RunManifest(
        subcommand=subcommand,
        config=raw_config,
        config_hash=digest,
        summary={"error": message},
        started_at=datetime.now(timezone.utc).isoformat(),
        exit_code=2,
    )
    data = manifest.model_dump(mode="json")
    write_json(path / MANIFEST_FILE, data)
    append_jsonl(get_settings().manifest_ledger, data)
    logger.info(f"Run rejected | subcommand={subcommand} | dir={path}")
    return manifest


@contextmanager
def open_run(subcommand: str, config: ExperimentConfig, run_dir: Optional[str] = None) -> Iterator[RunContext]:
    """
    Run directory plus a manifest that is written however the block exits.

    Example:
        >>> with open_run("eval", config) as run:
        ...     run.add_output("report", run.path("report.json"))
    """
    context = RunContext(subcommand, config, new_run_dir(subcommand, config_hash(config), run_dir))
    logger.info(f"Run started | subcommand={subcommand} | dir={context.run_dir} | config_hash={context.config_hash[:12]}")
    try:
        yield context
    except (ConfigurationError, ValidationError):
        context.finish(2)
        raise
    except BaseException:
        context.finish(1)
        raise
    context.finish(0)
