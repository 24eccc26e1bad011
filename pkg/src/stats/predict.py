"""
Predict: posterior-predictive summaries for new bookings.

Binary mode simulates one outcome per posterior draw and summarizes the 0/1 draws, so the
standard deviation is the Bernoulli sd of the predictive mean. Probability mode
summarizes the success probabilities themselves.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from src.core.errors import ShapeError, SizeError
from src.data.ingest import DesignMatrix
from src.families import get_family
from src.mcmc.sampler import SampleSet
from src.stats.mathkernels import log_sum_exp
from src.stats.model import LOG_PHI

logger = logging.getLogger(__name__)

PredictionMode = Literal["binary", "probability"]
PREDICTION_COLUMNS = ("Estimate", "Est.Error", "Q2.5", "Q97.5")


def _coefficient_block(samples: SampleSet) -> tuple[np.ndarray, np.ndarray | None]:
    """(S, P) coefficient draws and the (S,) log_phi draws if present, chains concatenated."""
    flat = samples.flat()
    if LOG_PHI in samples.param_names:
        j = samples.param_names.index(LOG_PHI)
        return np.delete(flat, j, axis=1), flat[:, j]
    return flat, None


def _coefficient_names(samples: SampleSet) -> list[str]:
    return [n for n in samples.param_names if n != LOG_PHI]


def _design_rows(samples: SampleSet, new_x: DesignMatrix | ArrayLike) -> np.ndarray:
    names = _coefficient_names(samples)
    if isinstance(new_x, DesignMatrix):
        if list(new_x.column_names) != names:
            raise ShapeError(
                f"new rows have columns {list(new_x.column_names)}, the fit used {names}"
            )
        return new_x.x
    x = np.asarray(new_x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != len(names):
        raise ShapeError(f"new rows need {len(names)} columns, got shape {x.shape}")
    return x


def _family_name(samples: SampleSet, family: str | None) -> str:
    if family is not None:
        return family
    return "beta_binomial_logit" if LOG_PHI in samples.param_names else "bernoulli_logit"


def posterior_epred(samples: SampleSet, new_x: DesignMatrix | ArrayLike) -> np.ndarray:
    """
    Success probability per draw: sigmoid(x . beta_s).

    A single row gives a length-S vector; a matrix of rows gives N x S.
    """
    single = not isinstance(new_x, DesignMatrix) and np.ndim(new_x) == 1
    x = _design_rows(samples, new_x)
    coef, _ = _coefficient_block(samples)
    mu = get_family("bernoulli_logit").mean(x @ coef.T)
    return mu[0] if single else mu


def posterior_predict(
    samples: SampleSet,
    new_x: DesignMatrix | ArrayLike,
    rng_seed: int,
    family: str | None = None,
    trials: int = 1,
) -> np.ndarray:
    """
    One simulated outcome per draw and row, deterministic for a fixed seed.

    Row i draws from SeedSequence(rng_seed, spawn_key=(i,)), so a row's outcomes do not
    depend on the other rows in the request.
    """
    single = not isinstance(new_x, DesignMatrix) and np.ndim(new_x) == 1
    x = _design_rows(samples, new_x)
    coef, log_phi = _coefficient_block(samples)
    fam = get_family(_family_name(samples, family))
    eta = x @ coef.T
    out = np.empty(eta.shape, dtype=np.int64)
    n_trials = np.full(1, trials, dtype=np.int64)
    for i in range(eta.shape[0]):
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(i,)))
        lp = log_phi if log_phi is not None else 0.0
        out[i] = fam.draw(rng, n_trials, eta[i][None, :], lp)[0]
    return out[0] if single else out


@dataclass
class PredictionRow:
    row_id: str
    estimate: float
    est_error: float
    q2_5: float
    q97_5: float


@dataclass
class PredictionTable:
    rows: list[PredictionRow]
    mode: PredictionMode = "binary"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.estimate, r.est_error, r.q2_5, r.q97_5) for r in self.rows],
            index=pd.Index([r.row_id for r in self.rows], name="row"),
            columns=list(PREDICTION_COLUMNS),
        )

    def to_text(self) -> str:
        width = max([len(r.row_id) for r in self.rows] + [3])
        lines = [" " * width + "".join(f" {c:>10}" for c in PREDICTION_COLUMNS)]
        for r in self.rows:
            if self.mode == "binary":
                q = [f"{int(r.q2_5):>10d}", f"{int(r.q97_5):>10d}"]
            else:
                q = [f"{r.q2_5:>10.5f}", f"{r.q97_5:>10.5f}"]
            cells = [f"{r.estimate:>10.5f}", f"{r.est_error:>10.5f}", *q]
            lines.append(f"{r.row_id:<{width}} " + " ".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        return self.to_frame().to_csv(float_format="%.17g")

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode, "rows": [asdict(r) for r in self.rows]}, indent=2)


def _summarize(row_id: str, values: np.ndarray, mode: PredictionMode) -> PredictionRow:
    # 0/1 outcomes take quantiles from the empirical CDF so they stay in {0, 1}.
    method = "inverted_cdf" if mode == "binary" else "linear"
    lower, upper = np.quantile(values, [0.025, 0.975], method=method)
    return PredictionRow(
        row_id=row_id,
        estimate=float(np.mean(values)),
        est_error=float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
        q2_5=float(lower),
        q97_5=float(upper),
    )


def prediction_table(
    samples: SampleSet,
    new_rows: DesignMatrix | ArrayLike,
    mode: PredictionMode = "binary",
    seed: int = 1,
    family: str | None = None,
) -> PredictionTable:
    """Estimate / Est.Error / Q2.5 / Q97.5 per new row."""
    x = _design_rows(samples, new_rows)
    if x.shape[0] == 0:
        raise SizeError("prediction_table needs at least one new row")
    if isinstance(new_rows, DesignMatrix) and new_rows.row_ids:
        row_ids = list(new_rows.row_ids)
    else:
        row_ids = [str(i + 1) for i in range(x.shape[0])]

    if mode == "binary":
        values = posterior_predict(samples, x, seed, family=family)
    elif mode == "probability":
        values = posterior_epred(samples, x)
    else:
        raise ValueError(f"unknown prediction mode: {mode!r}")
    rows = [_summarize(rid, values[i], mode) for i, rid in enumerate(row_ids)]
    logger.info("Predicted %d new row(s) in %s mode", len(rows), mode)
    return PredictionTable(rows=rows, mode=mode)


@dataclass
class AccuracyReport:
    n_obs: int
    accuracy: float
    brier: float
    mean_log_score: float
    threshold: float = 0.5

    def to_dict(self) -> dict:
        return asdict(self)


def predictive_accuracy(
    samples: SampleSet,
    dm: DesignMatrix,
    threshold: float = 0.5,
    family: str | None = None,
) -> AccuracyReport:
    """
    Out-of-sample scores on labelled rows.

    accuracy classifies by the posterior mean probability against `threshold`; the Brier
    score compares that mean with the observed success fraction; the log score averages
    log E_s[p(y_i | theta_s)] over rows.
    """
    if dm.n_rows == 0:
        raise SizeError("predictive_accuracy needs at least one labelled row")
    x = _design_rows(samples, dm)
    coef, log_phi = _coefficient_block(samples)
    fam = get_family(_family_name(samples, family))
    eta = x @ coef.T
    mu_bar = np.mean(fam.mean(eta), axis=1)
    frac = dm.y / dm.trials
    ll = fam.pointwise(dm.y, dm.trials, eta, log_phi if log_phi is not None else 0.0)
    log_score = log_sum_exp(ll, axis=1) - np.log(ll.shape[1])
    return AccuracyReport(
        n_obs=dm.n_rows,
        accuracy=float(np.mean((mu_bar >= threshold) == (frac >= 0.5))),
        brier=float(np.mean((mu_bar - frac) ** 2)),
        mean_log_score=float(np.mean(log_score)),
        threshold=threshold,
    )
