"""
JSON report writing and input fingerprinting
"""
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from pydantic import BaseModel

from gfa import __version__
from gfa.models import RunReport


def compute_checksum(file_path: Union[str, Path]) -> str:
    """
    Compute SHA256 checksum of a file

    Args:
        file_path: Path to file

    Returns:
        Hex digest of SHA256 checksum
    """
    sha256_hash = hashlib.sha256()
    with open(file_path, "rb") as f:
        for byte_block in iter(lambda: f.read(4096), b""):
            sha256_hash.update(byte_block)
    return sha256_hash.hexdigest()


def _plain(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Union[str, Path], payload: Any) -> Path:
    """Write a pydantic model, dict or array payload as indented JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(_plain(payload), indent=2)
    path.write_text(text)
    return path


def run_report(
    command: str,
    flags: Dict[str, Any],
    input_file: Optional[Union[str, Path]] = None,
    outputs: Optional[Dict[str, Union[str, Path]]] = None,
    result: Optional[Dict[str, Any]] = None,
) -> RunReport:
    """Assemble the top-level report written by every CLI command"""
    return RunReport(
        command=command,
        version=__version__,
        created=datetime.now(timezone.utc).isoformat(),
        flags=_plain(flags),
        input_file=str(input_file) if input_file else None,
        input_sha256=compute_checksum(input_file) if input_file else None,
        outputs={k: str(v) for k, v in (outputs or {}).items()},
        **(_plain(result) if result is not None else {}),
    )
