"""Run manifests: everything needed to repeat a command."""

import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from slicescope import __version__
from slicescope.errors import InputError


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManifest(BaseModel):
    """Resolved parameters, input hashes and timing of one command."""

    command: str
    argv: List[str] = Field(default_factory=lambda: list(sys.argv[1:]))
    parameters: Dict[str, Any] = Field(default_factory=dict)
    version: str = __version__
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    started_at: str = Field(default_factory=utc_now)
    finished_at: Optional[str] = None

    def add_input(self, path: Optional[str]) -> None:
        if path:
            if not Path(path).exists():
                raise InputError(f"missing file: {path}")
            self.inputs[path] = file_sha256(path)

    def write(self, out_dir: Path) -> Path:
        self.finished_at = utc_now()
        path = out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.model_dump(), f, indent=2, sort_keys=True, default=str)
        return path
