"""
Simulate: synthetic bookings drawn from a known GLM, in the booking CSV schema.

Every modelling column gets random values so a fit on any feature list has a
non-degenerate design; only the generator's `features` enter the linear predictor.
With trials n > 1 each covariate pattern is written as n rows sharing their predictors,
y of which carry the positive label, so aggregate_trials recovers (y, n).

Usage:
    result = simulate_bookings(SimulationConfig(n=500, beta=[0.5, -1.0],
                                                features=["car.parking.space"]))
    write_simulation(Path("runs/sim"), result)
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from src.core.config_schema import FORMAT_HEADER, FORMAT_VERSION
from src.core.errors import ConfigError
from src.core.schemas import SimulationConfig
from src.data.columns import (
    BOOKING_COLUMNS,
    BOOKING_ID,
    MODELLING_NUMERIC,
    RESPONSE,
    RESPONSE_LABELS,
    display_name,
    normalize_column,
)
from src.families import get_family

logger = logging.getLogger(__name__)

DATA_FILE = "bookings.csv"
TRUTH_FILE = "truth.yaml"

Generator = Callable[[np.random.Generator, int], np.ndarray]

_NUMERIC: dict[str, Generator] = {
    "number.of.adults": lambda rng, n: 1 + rng.poisson(0.8, n),
    "number.of.children": lambda rng, n: rng.poisson(0.3, n),
    "number.of.weekend.nights": lambda rng, n: rng.poisson(0.8, n),
    "number.of.week.nights": lambda rng, n: rng.poisson(2.2, n),
    "car.parking.space": lambda rng, n: rng.binomial(1, 0.3, n),
    "lead.time": lambda rng, n: rng.poisson(rng.gamma(1.5, 55.0, n)),
    "repeated": lambda rng, n: rng.binomial(1, 0.3, n),
    "P.C": lambda rng, n: rng.poisson(0.2, n),
    "P.not.C": lambda rng, n: rng.poisson(0.3, n),
    "average.price": lambda rng, n: np.round(rng.gamma(9.0, 11.5, n), 2),
    "special.requests": lambda rng, n: rng.poisson(0.6, n),
}
_LEVELS = {
    "type.of.meal": ("Meal Plan 1", "Meal Plan 2", "Not Selected"),
    "room.type": tuple(f"Room_Type {k}" for k in range(1, 8)),
    "market.segment.type": ("Aviation", "Complementary", "Corporate", "Offline", "Online"),
}
_LEVEL_WEIGHTS = {
    "type.of.meal": (0.75, 0.1, 0.15),
    "room.type": (0.7, 0.02, 0.01, 0.17, 0.03, 0.05, 0.02),
    "market.segment.type": (0.01, 0.02, 0.06, 0.3, 0.61),
}


@dataclass
class SimulationResult:
    frame: pd.DataFrame
    truth: dict
    n_patterns: int


def _check(sim: SimulationConfig) -> list[str]:
    features = [normalize_column(f) for f in sim.features]
    for f in features:
        if f not in MODELLING_NUMERIC:
            raise ConfigError(f"simulate.features: '{f}' is not a numeric modelling column")
    if len(sim.beta) != len(features) + 1:
        raise ConfigError(
            f"simulate.beta: expected {len(features) + 1} values (intercept first), "
            f"got {len(sim.beta)}"
        )
    family = get_family(sim.family)
    if family.has_dispersion and sim.phi is None:
        raise ConfigError(f"simulate.phi is required for family '{sim.family}'")
    if sim.family == "bernoulli_logit" and sim.trials != 1:
        raise ConfigError("simulate.trials must be 1 for the bernoulli_logit family")
    return features


def _dates(rng: np.random.Generator, n: int) -> np.ndarray:
    months = rng.integers(1, 13, n)
    days = rng.integers(1, 29, n)
    years = rng.choice([2017, 2018], n)
    return np.array([f"{m}/{d}/{y}" for m, d, y in zip(months, days, years, strict=True)])


def simulate_bookings(
    sim: SimulationConfig, positive_label: str = RESPONSE_LABELS[1]
) -> SimulationResult:
    """
    Draw sim.n covariate patterns and their outcomes.

    Raises:
        ConfigError: Invalid generator settings (unknown feature, wrong number of
            coefficients, missing phi).
    """
    features = _check(sim)
    if positive_label not in RESPONSE_LABELS:
        raise ConfigError(f"positive label {positive_label!r} not in {list(RESPONSE_LABELS)}")
    negative_label = next(lbl for lbl in RESPONSE_LABELS if lbl != positive_label)
    rng = np.random.default_rng(sim.seed)
    n = sim.n

    patterns: dict[str, np.ndarray] = {}
    for column, draw in _NUMERIC.items():
        patterns[column] = np.asarray(draw(rng, n))
    for column, levels in _LEVELS.items():
        patterns[column] = rng.choice(np.array(levels), n, p=_LEVEL_WEIGHTS[column])
    patterns["date.of.reservation"] = _dates(rng, n)

    x = np.column_stack([np.ones(n)] + [patterns[f].astype(float) for f in features])
    eta = x @ np.asarray(sim.beta, dtype=float)
    trials = np.full(n, sim.trials, dtype=np.int64)
    log_phi = float(np.log(sim.phi)) if sim.phi is not None else 0.0
    y = get_family(sim.family).draw(rng, trials, eta, log_phi).astype(np.int64)

    # One booking row per trial.
    repeat = np.repeat(np.arange(n), sim.trials)
    within = np.tile(np.arange(sim.trials), n)
    frame = pd.DataFrame({BOOKING_ID: _booking_ids(n, sim.trials)})
    for column in BOOKING_COLUMNS:
        if column in (BOOKING_ID, RESPONSE):
            continue
        values = patterns[column][repeat]
        if column == "average.price":
            values = [f"{v:.2f}" for v in values]
        frame[column] = values
    frame[RESPONSE] = np.where(within < y[repeat], positive_label, negative_label)
    frame.columns = [display_name(c) for c in frame.columns]

    truth = {
        "format_version": FORMAT_VERSION,
        "family": sim.family,
        "n_patterns": n,
        "trials": sim.trials,
        "seed": sim.seed,
        "positive_label": positive_label,
        "features": features,
        "beta": [float(b) for b in sim.beta],
        "phi": float(sim.phi) if sim.phi is not None else None,
        "successes": int(y.sum()),
    }
    logger.info(
        "Simulated %d pattern(s) x %d trial(s) from %s; %d successes",
        n, sim.trials, sim.family, int(y.sum()),
    )
    return SimulationResult(frame=frame, truth=truth, n_patterns=n)


def _booking_ids(n: int, trials: int) -> list[str]:
    if trials == 1:
        return [f"SIM{i + 1:06d}" for i in range(n)]
    return [f"SIM{i + 1:06d}-{k + 1:03d}" for i in range(n) for k in range(trials)]


def write_simulation(out: Path, result: SimulationResult) -> Path:
    """Write bookings.csv and truth.yaml into `out`; returns the CSV path."""
    out.mkdir(parents=True, exist_ok=True)
    data_path = out / DATA_FILE
    body = result.frame.to_csv(index=False, lineterminator="\n")
    data_path.write_text(f"{FORMAT_HEADER}\n{body}", encoding="utf-8")
    (out / TRUTH_FILE).write_text(
        f"{FORMAT_HEADER}\n" + yaml.safe_dump(result.truth, sort_keys=False), encoding="utf-8"
    )
    return data_path
