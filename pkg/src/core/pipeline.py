from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from src.core import artifacts
from src.core.contracts import ConvergenceValidator, ValidationResult
from src.core.errors import BayesCancelError, ConfigError, SizeError
from src.core.runtime_config import build_run_manifest
from src.core.schemas import RunConfig
from src.data.ingest import (
    Dataset,
    DesignMatrix,
    EncodingPlan,
    aggregate_trials,
    build_design_matrix,
    parse_csv,
    subsample,
)
from src.mcmc.sampler import SampleSet, sample
from src.stats.diagnostics import SummaryTable, summarize
from src.stats.loo import LooResult, elpd_loo
from src.stats.model import ModelSpec, Posterior, pointwise_log_lik

logger = logging.getLogger(__name__)


@dataclass
class FitContext:
    """Fit state that gets enriched at each step."""

    config: RunConfig
    out: Path

    data: Dataset | None = None
    train: Dataset | None = None
    plan: EncodingPlan | None = None
    design: DesignMatrix | None = None
    spec: ModelSpec | None = None
    samples: SampleSet | None = None
    table: SummaryTable | None = None
    loglik: np.ndarray | None = None
    loo: LooResult | None = None
    convergence: ValidationResult | None = None
    error: str | None = None

    started_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    # Seconds spent per step.
    timings: dict[str, float] = field(default_factory=dict)


def resolve_subsample(data: Dataset, n: int, seed: int) -> Dataset:
    """Training rows: all of them when n is 0 or at least the row count."""
    if data.row_count == 0:
        raise SizeError(f"no bookings in {data.source_path or 'input'}")
    if n == 0 or n == data.row_count:
        return data
    if n > data.row_count:
        logger.warning(
            "subsample_n=%d exceeds the %d available rows; fitting on all rows",
            n, data.row_count,
        )
        return data
    return subsample(data, n, seed)


class FitPipeline:
    """
    Fit pipeline.

    Steps:
    1. load       - parse the booking CSV
    2. subsample  - draw the training rows
    3. encode     - discover and freeze the encoding, build the design matrix
    4. aggregate  - optionally merge identical covariate patterns into trials
    5. sample     - run the chains
    6. summarize  - posterior table and convergence checks
    7. loo        - pointwise log-likelihood and PSIS-LOO
    8. write      - fit directory artifacts
    """

    def __init__(self, max_workers: int | None = None):
        self.max_workers = max_workers
        self.validator = ConvergenceValidator()

    def run(self, ctx: FitContext) -> FitContext:
        steps = [
            ("load", self._load),
            ("subsample", self._subsample),
            ("encode", self._encode),
            ("aggregate", self._aggregate),
            ("sample", self._sample),
            ("summarize", self._summarize),
            ("loo", self._loo),
            ("write", self._write),
        ]

        for step_name, step_fn in steps:
            t0 = time.perf_counter()
            try:
                ctx = step_fn(ctx)
            except BayesCancelError as e:
                logger.error("Fit failed at %s: %s", step_name, e)
                ctx.error = f"{step_name}: {e}"
                raise
            except Exception:
                logger.exception("Fit exception at %s", step_name)
                raise
            ctx.timings[step_name] = time.perf_counter() - t0
            logger.debug("Step %s done in %.2fs", step_name, ctx.timings[step_name])

        return ctx

    def _load(self, ctx: FitContext) -> FitContext:
        path = ctx.config.data.path
        if not path:
            raise ConfigError("data.path is required (pass --data)")
        if not Path(path).exists():
            raise ConfigError(f"data file not found: {path}")
        ctx.data = parse_csv(path)
        return ctx

    def _subsample(self, ctx: FitContext) -> FitContext:
        cfg = ctx.config.data
        ctx.train = resolve_subsample(ctx.data, cfg.subsample_n, cfg.subsample_seed)
        logger.info("Training on %d of %d bookings", ctx.train.row_count, ctx.data.row_count)
        return ctx

    def _encode(self, ctx: FitContext) -> FitContext:
        cfg = ctx.config
        ctx.plan = EncodingPlan.discover(
            ctx.train, cfg.data.features, positive_label=cfg.data.positive_label
        ).freeze()
        ctx.design = build_design_matrix(ctx.train, ctx.plan)
        ctx.spec = ModelSpec.for_design(ctx.design, cfg.model.family, cfg.model.priors)
        return ctx

    def _aggregate(self, ctx: FitContext) -> FitContext:
        if ctx.config.data.aggregate:
            ctx.design = aggregate_trials(ctx.design)
            logger.info("Aggregated into %d covariate patterns", ctx.design.n_rows)
        return ctx

    def _sample(self, ctx: FitContext) -> FitContext:
        target = Posterior(ctx.spec, ctx.design)
        ctx.samples = sample(target, ctx.config.sampler, max_workers=self.max_workers)
        return ctx

    def _summarize(self, ctx: FitContext) -> FitContext:
        ctx.table = summarize(ctx.samples)
        ctx.convergence = self.validator.validate(ctx.table, ctx.samples.divergent_count)
        return ctx

    def _loo(self, ctx: FitContext) -> FitContext:
        ctx.loglik = pointwise_log_lik(ctx.spec, ctx.design, ctx.samples)
        ctx.loo = elpd_loo(ctx.loglik, row_ids=ctx.design.row_ids)
        logger.info("elpd_loo = %.1f (se %.1f)", ctx.loo.elpd_loo, ctx.loo.se_elpd)
        return ctx

    def _write(self, ctx: FitContext) -> FitContext:
        out = ctx.out
        out.mkdir(parents=True, exist_ok=True)
        artifacts.write_config(out, ctx.config)
        artifacts.write_encoding(out, ctx.plan)
        artifacts.write_design(out, ctx.design)
        artifacts.write_draws(out, ctx.samples)
        artifacts.write_adaptation(out, ctx.samples)
        artifacts.write_loglik(out, ctx.loglik, ctx.design.row_ids)
        artifacts.write_summary(out, ctx.table, ctx.config.output.format)
        elapsed = (datetime.now(timezone.utc) - ctx.started_at).total_seconds()
        manifest = build_run_manifest(
            ctx.config,
            data_path=ctx.config.data.path,
            started_at=ctx.started_at,
            elapsed_seconds=elapsed,
            row_ids=ctx.train.booking_ids,
            extra={
                "training_ids": list(ctx.train.booking_ids),
                "model_rows": ctx.design.n_rows,
                "param_names": list(ctx.samples.param_names),
                "divergent": ctx.samples.divergent_count,
                "loo": ctx.loo.to_dict(),
                "convergence": {
                    "ok": ctx.convergence.ok,
                    "violations": ctx.convergence.violations,
                },
                "timings": {k: round(v, 3) for k, v in ctx.timings.items()},
            },
        )
        artifacts.write_manifest(out, manifest)
        logger.info("Wrote fit artifacts to %s", out)
        return ctx
