"""Run config format versioning + migrations.

Every file a run writes starts with a format-version header, and saved run configs
carry format_version so older fit directories keep loading.
"""

from __future__ import annotations

from copy import deepcopy
from typing import Any

FORMAT_VERSION = "1"
FORMAT_HEADER = f"# bayes-cancel format {FORMAT_VERSION}"


def _norm_ver(v: str | int | None) -> str:
    return str(v or "0").strip() or "0"


def get_format_descriptor() -> dict[str, Any]:
    return {
        "current_version": FORMAT_VERSION,
        "supported_versions": ["0", "1"],
        "migrations": [
            {
                "from": "0",
                "to": "1",
                "notes": [
                    "Flat sampler keys (chains, warmup, samples, seed) move under sampler",
                    "model: logistic / beta-binomial become registered family names",
                ],
            }
        ],
    }


def migrate_run_config(config: dict[str, Any]) -> dict[str, Any]:
    """Migrate a raw config dict to FORMAT_VERSION."""
    cfg = deepcopy(config or {})
    ver = _norm_ver(cfg.get("format_version"))

    if ver == "0":
        cfg = _migrate_0_to_1(cfg)
        ver = "1"

    cfg["format_version"] = ver
    return cfg


_FLAT_SAMPLER_KEYS = {
    "chains": "chains",
    "warmup": "warmup_iters",
    "samples": "sampling_iters",
    "seed": "seed",
    "target_accept": "target_accept",
}


def _migrate_0_to_1(cfg: dict[str, Any]) -> dict[str, Any]:
    cfg = deepcopy(cfg)
    sampler = cfg.setdefault("sampler", {})
    if not isinstance(sampler, dict):
        sampler = {}
        cfg["sampler"] = sampler
    for old, new in _FLAT_SAMPLER_KEYS.items():
        if old in cfg:
            sampler.setdefault(new, cfg.pop(old))

    model = cfg.get("model")
    if isinstance(model, str):
        cfg["model"] = {"family": model}

    cfg["format_version"] = "1"
    return cfg


def check_header(first_line: str, source: str) -> None:
    """Raise ConfigError unless `first_line` is a supported format header."""
    from src.core.errors import ConfigError

    prefix = "# bayes-cancel format "
    line = first_line.strip()
    if not line.startswith(prefix):
        raise ConfigError(f"{source}: missing format header")
    version = line[len(prefix) :]
    if version not in get_format_descriptor()["supported_versions"]:
        raise ConfigError(f"{source}: unsupported format version {version!r}")
