"""
Artifacts: reading and writing a fit directory.

Layout of a fit directory:
    config.yaml       resolved RunConfig
    encoding.yaml     frozen EncodingPlan
    design.csv        encoded model rows: row id, design columns, y, trials
    draws.csv         one row per post-warmup draw: chain, iteration, sampler stats, params
    loglik.npz        N x S pointwise log-likelihood plus row ids
    summary.<ext>     posterior summary in the requested format
    adaptation.json   final step size and inverse mass per chain
    manifest.json     seed, timing and data hash

Text files start with the format header line; JSON files carry a format_version key and
loglik.npz a format_version entry.
"""

from __future__ import annotations

import io
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml

from src.core.config_loader import dump_run_config, validate_run_config
from src.core.config_schema import FORMAT_HEADER, FORMAT_VERSION, check_header, migrate_run_config
from src.core.errors import ConfigError
from src.core.schemas import RunConfig
from src.data.ingest import DesignMatrix, EncodingPlan
from src.mcmc.adaptation import AdaptationState
from src.mcmc.sampler import STAT_FIELDS, SampleSet
from src.stats.diagnostics import SummaryTable

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.yaml"
ENCODING_FILE = "encoding.yaml"
DESIGN_FILE = "design.csv"
DRAWS_FILE = "draws.csv"
LOGLIK_FILE = "loglik.npz"
ADAPTATION_FILE = "adaptation.json"
MANIFEST_FILE = "manifest.json"
SUMMARY_EXT = {"text": "txt", "csv": "csv", "structured": "json"}

# Sampler statistics carry a trailing double underscore so they never clash with
# parameter names.
_STAT_COLUMNS = {name: f"{name}__" for name in STAT_FIELDS}
_INT_STATS = ("tree_depth", "n_leapfrog", "divergent")


def _write_text(path: Path, body: str) -> None:
    path.write_text(f"{FORMAT_HEADER}\n{body}", encoding="utf-8")


def _read_text(path: Path) -> str:
    if not path.exists():
        raise ConfigError(f"missing fit artifact: {path}")
    header, _, body = path.read_text(encoding="utf-8").partition("\n")
    check_header(header, str(path))
    return body


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    payload = {"format_version": FORMAT_VERSION, **payload}
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"missing fit artifact: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


# --- Config and encoding ---


def write_config(out: Path, cfg: RunConfig) -> Path:
    path = out / CONFIG_FILE
    _write_text(path, dump_run_config(cfg))
    return path


def read_config(fit_dir: str | Path) -> RunConfig:
    raw = yaml.safe_load(_read_text(Path(fit_dir) / CONFIG_FILE)) or {}
    return validate_run_config(migrate_run_config(raw))


def write_encoding(out: Path, plan: EncodingPlan) -> Path:
    path = out / ENCODING_FILE
    _write_text(path, yaml.safe_dump(plan.model_dump(mode="json"), sort_keys=False))
    return path


def read_encoding(fit_dir: str | Path) -> EncodingPlan:
    raw = yaml.safe_load(_read_text(Path(fit_dir) / ENCODING_FILE)) or {}
    return EncodingPlan.model_validate(raw).freeze()


# --- Draws ---


def draws_frame(samples: SampleSet) -> pd.DataFrame:
    """Chain-major table: one row per (chain, iteration)."""
    n_chains, n_draws = samples.n_chains, samples.n_draws
    frame = pd.DataFrame(
        {
            "chain": np.repeat(np.arange(1, n_chains + 1), n_draws),
            "iteration": np.tile(np.arange(1, n_draws + 1), n_chains),
        }
    )
    for name, column in _STAT_COLUMNS.items():
        values = np.asarray(samples.stats[name]).reshape(-1)
        frame[column] = values.astype(np.int64) if name in _INT_STATS else values
    params = pd.DataFrame(samples.flat(), columns=list(samples.param_names))
    return pd.concat([frame, params], axis=1)


def write_design(out: Path, dm: DesignMatrix) -> Path:
    path = out / DESIGN_FILE
    body = dm.to_frame().to_csv(index=False, float_format="%.17g", lineterminator="\n")
    _write_text(path, body)
    return path


def write_draws(out: Path, samples: SampleSet) -> Path:
    path = out / DRAWS_FILE
    body = draws_frame(samples).to_csv(index=False, float_format="%.17g", lineterminator="\n")
    _write_text(path, body)
    return path


def read_draws(fit_dir: str | Path, cfg: RunConfig | None = None) -> SampleSet:
    fit_dir = Path(fit_dir)
    cfg = cfg or read_config(fit_dir)
    frame = pd.read_csv(
        io.StringIO(_read_text(fit_dir / DRAWS_FILE)), float_precision="round_trip"
    )
    for column in ("chain", "iteration", *_STAT_COLUMNS.values()):
        if column not in frame.columns:
            raise ConfigError(f"{fit_dir / DRAWS_FILE}: missing column '{column}'")

    frame = frame.sort_values(["chain", "iteration"], kind="stable")
    n_chains = int(frame["chain"].nunique())
    n_draws = len(frame) // n_chains
    if n_chains * n_draws != len(frame):
        raise ConfigError(f"{fit_dir / DRAWS_FILE}: chains have unequal lengths")

    reserved = {"chain", "iteration", *_STAT_COLUMNS.values()}
    names = [c for c in frame.columns if c not in reserved]
    draws = frame[names].to_numpy(dtype=float).reshape(n_chains, n_draws, len(names))
    stats = {
        name: frame[column].to_numpy().reshape(n_chains, n_draws)
        for name, column in _STAT_COLUMNS.items()
    }
    stats["divergent"] = stats["divergent"].astype(bool)
    return SampleSet(
        draws=draws,
        param_names=names,
        stats=stats,
        config_echo=cfg.sampler,
        adaptation=read_adaptation(fit_dir),
    )


def write_adaptation(out: Path, samples: SampleSet) -> Path:
    path = out / ADAPTATION_FILE
    _write_json(path, {"chains": [a.to_dict() for a in samples.adaptation]})
    return path


def read_adaptation(fit_dir: str | Path) -> list[AdaptationState]:
    path = Path(fit_dir) / ADAPTATION_FILE
    if not path.exists():
        return []
    return [AdaptationState.from_dict(c) for c in _read_json(path).get("chains", [])]


# --- Pointwise log-likelihood ---


def write_loglik(out: Path, loglik: np.ndarray, row_ids: tuple[str, ...]) -> Path:
    path = out / LOGLIK_FILE
    with path.open("wb") as f:
        np.savez_compressed(
            f,
            loglik=np.asarray(loglik, dtype=float),
            row_ids=np.asarray(row_ids, dtype=str),
            format_version=np.asarray(FORMAT_VERSION),
        )
    return path


def read_loglik(fit_dir: str | Path) -> tuple[np.ndarray, tuple[str, ...]]:
    path = Path(fit_dir) / LOGLIK_FILE
    if not path.exists():
        raise ConfigError(f"missing fit artifact: {path}")
    with np.load(path, allow_pickle=False) as data:
        version = str(data["format_version"]) if "format_version" in data else "0"
        if version != FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported format version {version!r}")
        return data["loglik"], tuple(str(r) for r in data["row_ids"])


# --- Summary and manifest ---


def render_summary(table: SummaryTable, fmt: str) -> str:
    if fmt == "text":
        return table.to_text()
    if fmt == "csv":
        return table.to_csv()
    if fmt == "structured":
        return table.to_json() + "\n"
    raise ConfigError(f"unknown output format: {fmt!r}")


def write_summary(out: Path, table: SummaryTable, fmt: str) -> Path:
    path = out / f"summary.{SUMMARY_EXT[fmt]}"
    if fmt == "structured":
        _write_json(path, json.loads(table.to_json()))
    else:
        _write_text(path, render_summary(table, fmt))
    return path


def write_manifest(out: Path, manifest: dict[str, Any]) -> Path:
    path = out / MANIFEST_FILE
    _write_json(path, manifest)
    return path


def read_manifest(fit_dir: str | Path) -> dict[str, Any]:
    return _read_json(Path(fit_dir) / MANIFEST_FILE)
