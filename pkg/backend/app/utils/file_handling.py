"""
File handling utilities: atomic writes, append-only ledgers, canonical JSON and hashing.
"""

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

from app.core.exceptions import ArtifactError

logger = logging.getLogger(__name__)


def canonical_json(data: Any) -> str:
    """Serialize with sorted keys so identical content yields identical bytes."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path: Path, text: str) -> Path:
    """
    Write text to path through a temporary sibling file and os.replace.

    Raises:
        ArtifactError: If the write fails.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except OSError as e:
        raise ArtifactError(f"Failed to write {path}: {e}", details={"path": str(path)})
    return path


def write_json(path: Path, data: Any) -> Path:
    """Write canonical JSON atomically."""
    return atomic_write_text(path, canonical_json(data))


def format_cell(value: Any) -> str:
    """CSV cell formatting; floats use repr so values round-trip exactly."""
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render a header plus rows as CSV text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV file atomically."""
    return atomic_write_text(path, rows_to_csv(header, rows))


def append_jsonl(path: Path, record: Mapping[str, Any]) -> Path:
    """
    Append one JSON line to an append-only ledger.

    The existing content is copied into a temporary file together with the
    new line and swapped in with os.replace, so readers never see a torn line.
    """
    path = Path(path)
    existing = path.read_text(encoding="utf-8") if path.exists() else ""
    line = json.dumps(record, sort_keys=True, ensure_ascii=False)
    return atomic_write_text(path, existing + line + "\n")


def append_csv_row(path: Path, row: Mapping[str, Any]) -> Path:
    """
    Append a row to a CSV ledger, writing the header on first use.

    Raises:
        ArtifactError: If the row's columns differ from the ledger header.
    """
    path = Path(path)
    columns = sorted(row)
    if path.exists():
        existing = path.read_text(encoding="utf-8")
        header = next(csv.reader(io.StringIO(existing)), [])
        if header != columns:
            raise ArtifactError(
                f"Ledger {path} has different columns",
                details={"ledger_columns": header, "row_columns": columns}
            )
        body = rows_to_csv(columns, [[row[c] for c in columns]]).split("\n", 1)[1]
        return atomic_write_text(path, existing + body)
    return write_csv(path, columns, [[row[c] for c in columns]])


def read_csv(path: Path) -> List[Dict[str, str]]:
    """Read a CSV file into a list of dicts."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def sha256_file(path: Path) -> str:
    """Hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    """Hex digest of a string."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def safe_filename(sample_id: str) -> str:
    """Flatten a root-relative id into a single file name."""
    return sample_id.replace("/", "__").replace("\\", "__")


def write_matrix_csv(path: Path, matrix: Iterable[Sequence[float]]) -> Path:
    """Write a numeric matrix as header-less CSV, one row per line."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in matrix:
        writer.writerow([format_cell(float(v)) for v in row])
    return atomic_write_text(path, buffer.getvalue())
