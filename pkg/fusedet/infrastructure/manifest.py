"""Run manifest: resolved config, seed, code version and timestamp."""

import json
import logging
import platform
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

import torch

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def build_manifest(
    subcommand: str,
    config: dict[str, Any],
    seed: int,
    version: str,
    extra: dict[str, Any] | None = None,
) -> dict[str, Any]:
    return {
        "subcommand": subcommand,
        "version": version,
        "seed": seed,
        "created_at": datetime.now(UTC).isoformat(),
        "python": platform.python_version(),
        "torch": torch.__version__,
        "config": config,
        **(extra or {}),
    }


def write_manifest(directory: Path, manifest: dict[str, Any]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info("Manifest written path=%s subcommand=%s", path, manifest["subcommand"])
    return path


def read_manifest(directory: Path) -> dict[str, Any]:
    return json.loads((Path(directory) / MANIFEST_NAME).read_text(encoding="utf-8"))
