"""
Config loader: YAML run configs with dotted-key overrides.

Precedence, lowest first: RunConfig defaults, the YAML file, `--set section.key=value`
pairs, then explicit CLI flags (passed the same way as dotted overrides).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from src.core.config_schema import migrate_run_config
from src.core.errors import ConfigError
from src.core.schemas import RunConfig


def load_run_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """
    Resolve a RunConfig.

    Raises:
        ConfigError: Missing file, malformed YAML, unknown keys or invalid values; the
            message names the failing field.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        raw = _load_yaml(config_path)
    raw = migrate_run_config(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            set_dotted(raw, key, value)
    return validate_run_config(raw)


def validate_run_config(raw: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "(root)"
        raise ConfigError(f"invalid config field '{field}': {first['msg']}") from None


def set_dotted(target: dict[str, Any], key: str, value: Any) -> None:
    """set_dotted(cfg, "sampler.chains", 2) -> cfg["sampler"]["chains"] = 2."""
    parts = [p for p in key.split(".") if p]
    if not parts:
        raise ConfigError(f"empty override key: {key!r}")
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override '{key}': '{part}' is not a section")
        node = child
    node[parts[-1]] = value


def parse_override(item: str) -> tuple[str, Any]:
    """'sampler.chains=2' -> ('sampler.chains', 2); values are parsed as YAML scalars."""
    if "=" not in item:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    key, _, text = item.partition("=")
    try:
        value = yaml.safe_load(text) if text.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"override '{key}': cannot parse {text!r}: {e}") from None
    return key.strip(), value


def dump_run_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)


def _load_yaml(path: Path) -> dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: malformed YAML: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data
