from __future__ import annotations

import pytest

from src.core.config_schema import (
    FORMAT_HEADER,
    FORMAT_VERSION,
    check_header,
    get_format_descriptor,
    migrate_run_config,
)
from src.core.errors import ConfigError


def test_migrate_moves_flat_sampler_keys() -> None:
    cfg = {"chains": 2, "warmup": 200, "samples": 300, "seed": 5, "model": "beta-binomial"}
    out = migrate_run_config(cfg)

    assert out["format_version"] == FORMAT_VERSION
    assert out["sampler"] == {
        "chains": 2,
        "warmup_iters": 200,
        "sampling_iters": 300,
        "seed": 5,
    }
    assert out["model"] == {"family": "beta-binomial"}
    assert "chains" in cfg


def test_migrate_keeps_explicit_sampler_values() -> None:
    out = migrate_run_config({"chains": 2, "sampler": {"chains": 6}})
    assert out["sampler"]["chains"] == 6


def test_migrate_is_idempotent_for_latest() -> None:
    cfg = {"format_version": "1", "sampler": {"chains": 3}, "model": {"family": "logistic"}}
    out = migrate_run_config(cfg)
    assert out == cfg
    assert migrate_run_config(out) == out


def test_empty_config_becomes_current() -> None:
    assert migrate_run_config({})["format_version"] == FORMAT_VERSION
    assert migrate_run_config(None)["format_version"] == FORMAT_VERSION


def test_descriptor_lists_versions() -> None:
    desc = get_format_descriptor()
    assert desc["current_version"] == FORMAT_VERSION
    assert FORMAT_VERSION in desc["supported_versions"]


def test_check_header() -> None:
    check_header(FORMAT_HEADER + "\n", "draws.csv")
    with pytest.raises(ConfigError, match="missing format header"):
        check_header("chain,iteration", "draws.csv")
    with pytest.raises(ConfigError, match="unsupported format version"):
        check_header("# bayes-cancel format 9", "draws.csv")
