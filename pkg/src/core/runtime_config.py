from __future__ import annotations

import hashlib
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from src.core.config_schema import FORMAT_VERSION
from src.core.schemas import RunConfig

_HASH_BLOCK = 1 << 20


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as f:
        for block in iter(lambda: f.read(_HASH_BLOCK), b""):
            digest.update(block)
    return digest.hexdigest()


def build_run_manifest(
    cfg: RunConfig,
    *,
    data_path: str | Path | None,
    started_at: datetime,
    elapsed_seconds: float,
    row_ids: tuple[str, ...] = (),
    extra: dict | None = None,
) -> dict:
    """Build the run manifest written next to every fit.

    Together with the data file it names (and whose hash it records) the manifest is
    enough to rerun the fit and get the same draws.
    """
    return {
        "format_version": FORMAT_VERSION,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "started_at": started_at.isoformat(),
        "elapsed_seconds": round(float(elapsed_seconds), 3),
        "command": cfg.command,
        "seed": cfg.sampler.seed,
        "subsample_seed": cfg.data.subsample_seed,
        "data": {
            "path": str(data_path) if data_path is not None else None,
            "sha256": file_sha256(data_path) if data_path is not None else None,
            "n_rows": len(row_ids),
        },
        "config": cfg.model_dump(mode="json"),
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        **(extra or {}),
    }
