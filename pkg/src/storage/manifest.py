"""Run manifests written next to every CLI artifact."""

import hashlib
import logging
import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field

from src.storage.model_store import write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = ("numpy", "pydantic", "pydantic-settings", "click", "orjson", "tabulate", "PyYAML", "rich")


def file_digest(path: Union[str, Path]) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            sha.update(block)
    return sha.hexdigest()


def package_versions(packages=TRACKED_PACKAGES) -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {}
    for name in packages:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


class RunManifest(BaseModel):
    """Config echo, seed, versions, timings and input digests of one run."""

    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)
    versions: Dict[str, Optional[str]] = Field(default_factory=package_versions)
    python: str = Field(default_factory=lambda: sys.version.split()[0])
    platform: str = Field(default_factory=platform.platform)
    created: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def add_input(self, path: Union[str, Path]) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: Union[str, Path]) -> None:
        self.outputs.append(str(path))

    def write(self, directory: Union[str, Path]) -> Path:
        path = write_json(self.model_dump(mode="json"), Path(directory) / MANIFEST_NAME)
        logger.debug("Manifest written", extra={"path": str(path), "command": self.command})
        return path
