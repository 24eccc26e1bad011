"""
bayes-cancel CLI: fit, inspect, compare and use Bayesian cancellation models.

Usage:
    bayes-cancel fit --data bookings.csv --model logistic --out runs/lr
    bayes-cancel summary runs/lr --format csv
    bayes-cancel compare runs/lr runs/bb
    bayes-cancel predict runs/lr --data new_bookings.csv
    bayes-cancel predict runs/lr --holdout-n 3
    bayes-cancel simulate --n 500 --beta 0.5,-1.2 --features car.parking.space --out runs/sim

Exit codes: 0 success, 2 usage/config, 3 data, 4 sampler, 5 comparison mismatch.
"""

from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import Any

import click

from src.config import get_settings
from src.core import artifacts
from src.core.config_loader import load_run_config, parse_override
from src.core.config_schema import FORMAT_HEADER
from src.core.errors import BayesCancelError, ConfigError
from src.core.pipeline import FitContext, FitPipeline

logger = logging.getLogger(__name__)

FORMATS = click.Choice(["text", "csv", "structured"])


def handle_errors(fn):
    """Map domain errors to their exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BayesCancelError as e:
            click.echo(f"Error: {e}", err=True)
            raise SystemExit(e.exit_code) from None

    return wrapper


def _split(value: str | None) -> list[str] | None:
    if value is None:
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


def _floats(value: str | None) -> list[float] | None:
    items = _split(value)
    if items is None:
        return None
    try:
        return [float(v) for v in items]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {value!r}") from None


def _resolve(config: str | None, command: str, sets: tuple[str, ...], flags: dict[str, Any]):
    overrides: dict[str, Any] = {"command": command}
    for item in sets:
        key, value = parse_override(item)
        overrides[key] = value
    # Explicit flags win over --set.
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return load_run_config(config, overrides)


def _emit(text: str, out: Path | None, name: str) -> None:
    click.echo(text, nl=False)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(f"{FORMAT_HEADER}\n{text}", encoding="utf-8")


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging")
def cli(verbose: bool):
    """bayes-cancel: Bayesian GLMs for hotel booking cancellations."""
    level = logging.DEBUG if verbose else get_settings().log_level.upper()
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")


# --- fit ---


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="YAML run config")
@click.option("--data", default=None, help="Booking CSV")
@click.option("--model", default=None, help="logistic | beta-binomial | binomial")
@click.option("--features", default=None, help="Comma-separated predictor columns")
@click.option("--positive-label", default=None, help="Label coded as success (y=1)")
@click.option("--subsample-n", type=int, default=None, help="Training rows; 0 uses all")
@click.option("--subsample-seed", type=int, default=None)
@click.option("--aggregate/--no-aggregate", default=None,
              help="Merge identical covariate patterns into binomial trials")
@click.option("--chains", type=int, default=None)
@click.option("--warmup", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--target-accept", type=float, default=None)
@click.option("--max-tree-depth", type=int, default=None)
@click.option("--out", default=None, help="Fit directory")
@click.option("--format", "fmt", type=FORMATS, default=None, help="Summary format")
@click.option("--set", "sets", multiple=True, help="Dotted override, e.g. sampler.chains=2")
@handle_errors
def fit(config_path, data, model, features, positive_label, subsample_n, subsample_seed,
        aggregate, chains, warmup, samples, seed, target_accept, max_tree_depth, out, fmt,
        sets):
    """Fit a model and write a fit directory."""
    cfg = _resolve(config_path, "fit", sets, {
        "data.path": data,
        "data.features": _split(features),
        "data.positive_label": positive_label,
        "data.subsample_n": subsample_n,
        "data.subsample_seed": subsample_seed,
        "data.aggregate": aggregate,
        "model.family": model,
        "sampler.chains": chains,
        "sampler.warmup_iters": warmup,
        "sampler.sampling_iters": samples,
        "sampler.seed": seed,
        "sampler.target_accept": target_accept,
        "sampler.max_tree_depth": max_tree_depth,
        "output.out": out,
        "output.format": fmt,
    })
    ctx = FitPipeline().run(FitContext(config=cfg, out=Path(cfg.output.out)))

    click.echo(artifacts.render_summary(ctx.table, cfg.output.format), nl=False)
    click.echo(
        f"\nelpd_loo {ctx.loo.elpd_loo:.1f} (se {ctx.loo.se_elpd:.1f}), "
        f"p_loo {ctx.loo.p_loo:.1f}, divergent {ctx.samples.divergent_count}",
        err=True,
    )
    if not ctx.convergence.ok:
        click.echo("Warning: convergence checks failed; see log", err=True)


# --- summary ---


@cli.command()
@click.argument("fit_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMATS, default="text")
@handle_errors
def summary(fit_dir: str, fmt: str):
    """Re-render the posterior summary of a fit directory."""
    from src.stats.diagnostics import summarize

    samples = artifacts.read_draws(fit_dir)
    click.echo(artifacts.render_summary(summarize(samples), fmt), nl=False)


# --- compare ---


@cli.command()
@click.argument("fit_dirs", nargs=-1, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMATS, default="text")
@handle_errors
def compare(fit_dirs: tuple[str, ...], fmt: str):
    """Rank two or more fits by PSIS-LOO."""
    from src.stats.loo import compare as compare_loo
    from src.stats.loo import elpd_loo

    if len(fit_dirs) < 2:
        raise click.UsageError("compare needs at least two fit directories")

    names = [Path(d).name or d for d in fit_dirs]
    if len(set(names)) != len(names):
        names = list(fit_dirs)
    results = {}
    for name, fit_dir in zip(names, fit_dirs, strict=True):
        loglik, row_ids = artifacts.read_loglik(fit_dir)
        results[name] = elpd_loo(loglik, row_ids=row_ids)

    report = compare_loo(results)
    if fmt == "text":
        click.echo(report.to_text(), nl=False)
    elif fmt == "csv":
        click.echo(report.to_frame().to_csv(index=False, float_format="%.17g"), nl=False)
    else:
        click.echo(report.to_json())


# --- predict ---


@cli.command()
@click.argument("fit_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--data", default=None, help="CSV of new bookings (booking status optional)")
@click.option("--holdout-n", type=int, default=None,
              help="Predict K bookings from the training file that the fit never saw")
@click.option("--mode", type=click.Choice(["binary", "probability"]), default="binary")
@click.option("--seed", type=int, default=1)
@click.option("--format", "fmt", type=FORMATS, default="text")
@click.option("--out", default=None, help="Also write predictions into this directory")
@handle_errors
def predict(fit_dir, data, holdout_n, mode, seed, fmt, out):
    """Posterior-predictive forecasts for new bookings."""
    from src.data.ingest import Dataset, build_design_matrix, holdout, parse_csv, subsample
    from src.stats.predict import prediction_table, predictive_accuracy

    if (data is None) == (holdout_n is None):
        raise click.UsageError("pass exactly one of --data or --holdout-n")

    cfg = artifacts.read_config(fit_dir)
    plan = artifacts.read_encoding(fit_dir)
    samples = artifacts.read_draws(fit_dir, cfg)

    if data is not None:
        new = parse_csv(data, require_response=False)
    else:
        source = parse_csv(cfg.data.path)
        trained = set(artifacts.read_manifest(fit_dir).get("training_ids", []))
        train = Dataset(
            records=tuple(r for r in source.records if r.booking_id in trained),
            source_path=source.source_path,
        )
        new = subsample(holdout(source, train), holdout_n, cfg.data.subsample_seed)

    labelled = new.row_count > 0 and all(r.booking_status is not None for r in new.records)
    dm = build_design_matrix(new, plan, require_response=labelled, require_variation=False)
    table = prediction_table(samples, dm, mode=mode, seed=seed, family=cfg.model.family)

    if fmt == "text":
        text = table.to_text()
    elif fmt == "csv":
        text = table.to_csv()
    else:
        text = table.to_json() + "\n"
    _emit(text, Path(out) if out else None, f"predictions.{artifacts.SUMMARY_EXT[fmt]}")

    if labelled:
        report = predictive_accuracy(samples, dm, family=cfg.model.family)
        click.echo(
            f"\naccuracy {report.accuracy:.3f}, brier {report.brier:.4f}, "
            f"log score {report.mean_log_score:.4f} on {report.n_obs} labelled row(s)",
            err=True,
        )


# --- simulate ---


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--n", type=int, default=None, help="Covariate patterns to draw")
@click.option("--family", default=None)
@click.option("--beta", default=None, help="Comma-separated coefficients, intercept first")
@click.option("--features", default=None, help="Comma-separated numeric predictor columns")
@click.option("--trials", type=int, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--positive-label", default=None)
@click.option("--out", default=None, help="Output directory")
@click.option("--set", "sets", multiple=True)
@handle_errors
def simulate(config_path, n, family, beta, features, trials, phi, seed, positive_label, out,
             sets):
    """Write a synthetic booking CSV drawn from a known model."""
    from src.data.simulate import simulate_bookings, write_simulation

    cfg = _resolve(config_path, "simulate", sets, {
        "simulate.n": n,
        "simulate.family": family,
        "simulate.beta": _floats(beta),
        "simulate.features": _split(features),
        "simulate.trials": trials,
        "simulate.phi": phi,
        "simulate.seed": seed,
        "data.positive_label": positive_label,
        "output.out": out,
    })
    result = simulate_bookings(cfg.simulate, positive_label=cfg.data.positive_label)
    path = write_simulation(Path(cfg.output.out), result)
    click.echo(f"Wrote {len(result.frame)} booking row(s) to {path}")


if __name__ == "__main__":
    cli()
