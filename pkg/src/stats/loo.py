"""
LOO: Pareto-smoothed importance-sampling leave-one-out cross-validation and comparison.

Usage:
    result = elpd_loo(pointwise_log_lik(spec, dm, samples), row_ids=dm.row_ids)
    report = compare({"lr_model": lr, "binomial_beta_model": bb})
    print(report.to_text())
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from src.core.errors import ComparisonError, SizeError
from src.stats.mathkernels import log_sum_exp

logger = logging.getLogger(__name__)

K_WARN = 0.7
# Reported shape when no tail can be fitted (too few draws or a flat tail).
K_SENTINEL = -1e10
MIN_TAIL_DRAWS = 25
_LOG_TINY = np.log(np.finfo(float).tiny)


def tail_length(n_draws: int) -> int:
    return int(np.ceil(min(0.2 * n_draws, 3.0 * np.sqrt(n_draws))))


def gpd_fit(exceedances: np.ndarray) -> tuple[float, float]:
    """
    Shape and scale of a generalized Pareto fit to sorted positive exceedances.

    Profile-likelihood quadrature over the scale-inverse b with weakly informative
    shrinkage of the shape toward 0.5.
    """
    prior_bs = 3
    prior_k = 10
    n = len(exceedances)
    m_est = 30 + int(n**0.5)

    b_ary = 1 - np.sqrt(m_est / (np.arange(1, m_est + 1, dtype=float) - 0.5))
    b_ary /= prior_bs * exceedances[int(n / 4 + 0.5) - 1]
    b_ary += 1 / exceedances[-1]

    k_ary = np.log1p(-b_ary[:, None] * exceedances).mean(axis=1)
    len_scale = n * (np.log(-(b_ary / k_ary)) - k_ary - 1)
    weights = 1 / np.exp(len_scale - len_scale[:, None]).sum(axis=1)

    keep = weights >= 10 * np.finfo(float).eps
    weights, b_ary = weights[keep], b_ary[keep]
    weights /= weights.sum()

    b_post = np.sum(b_ary * weights)
    k_post = np.log1p(-b_post * exceedances).mean()
    sigma = -k_post / b_post
    k_post = (n * k_post + prior_k * 0.5) / (n + prior_k)
    return float(k_post), float(sigma)


def gpd_quantile(probs: np.ndarray, k: float, sigma: float) -> np.ndarray:
    if abs(k) < np.finfo(float).eps:
        return -sigma * np.log1p(-probs)
    return sigma * np.expm1(-k * np.log1p(-probs)) / k


def _truncated_weights(log_ratios: np.ndarray) -> np.ndarray:
    """Normalized weights with raw ratios capped at sqrt(S) times their mean."""
    lw = log_ratios - np.max(log_ratios)
    cap = float(log_sum_exp(lw)) - np.log(lw.size) + 0.5 * np.log(lw.size)
    lw = np.minimum(lw, cap)
    return np.exp(lw - log_sum_exp(lw))


def _warn_truncated(n_draws: int) -> None:
    logger.warning(
        "Only %d draws (< %d): using truncated importance sampling without tail fit",
        n_draws, MIN_TAIL_DRAWS,
    )


def psis_smooth(log_ratios: ArrayLike, warn: bool = True) -> tuple[np.ndarray, float]:
    """
    Pareto-smoothed importance weights for one observation.

    The M = ceil(min(0.2 S, 3 sqrt(S))) largest ratios are replaced by expected order
    statistics of a generalized Pareto fit to their exceedances over the (M+1)-th largest
    ratio, then capped at the largest raw ratio.

    Returns:
        (weights summing to 1, k_hat). k_hat is K_SENTINEL when nothing could be fitted.
    """
    lw = np.array(log_ratios, dtype=float).reshape(-1)
    n = lw.size
    if n == 0:
        raise SizeError("psis_smooth: no draws")
    if not np.all(np.isfinite(lw)):
        raise SizeError("psis_smooth: log ratios must be finite")
    if n < MIN_TAIL_DRAWS:
        if warn:
            _warn_truncated(n)
        return _truncated_weights(lw), K_SENTINEL

    lw -= np.max(lw)
    order = np.argsort(lw)
    cutoff = max(lw[order[-tail_length(n) - 1]], _LOG_TINY)
    exp_cutoff = np.exp(cutoff)
    (tail_idx,) = np.nonzero(lw > cutoff)
    k = K_SENTINEL
    if tail_idx.size > 4:
        tail_order = np.argsort(lw[tail_idx])
        exceedances = np.exp(lw[tail_idx]) - exp_cutoff
        k, sigma = gpd_fit(exceedances[tail_order])
        if np.isfinite(k) and sigma > 0:
            probs = np.arange(0.5, tail_idx.size) / tail_idx.size
            smoothed = np.log(gpd_quantile(probs, k, sigma) + exp_cutoff)
            lw[tail_idx[tail_order]] = smoothed
            lw[lw > 0] = 0.0
        else:
            k = K_SENTINEL
    weights = np.exp(lw - log_sum_exp(lw))
    return weights, float(k)


@dataclass
class LooResult:
    elpd_loo: float
    se_elpd: float
    pointwise_elpd: np.ndarray
    pareto_k: np.ndarray
    n_high_k: int
    # In-sample log pointwise predictive density and the effective parameter count.
    lpd: float = 0.0
    p_loo: float = 0.0
    row_ids: tuple[str, ...] = field(default=())

    @property
    def n_obs(self) -> int:
        return int(self.pointwise_elpd.shape[0])

    def to_dict(self) -> dict:
        return {
            "elpd_loo": self.elpd_loo,
            "se_elpd": self.se_elpd,
            "p_loo": self.p_loo,
            "lpd": self.lpd,
            "n_obs": self.n_obs,
            "n_high_k": self.n_high_k,
        }


def elpd_loo(loglik: ArrayLike, row_ids: Sequence[str] = ()) -> LooResult:
    """
    PSIS-LOO from an N x S pointwise log-likelihood matrix.

    Rows with k_hat > 0.7 are kept but counted in n_high_k and logged.
    """
    ll = np.asarray(loglik, dtype=float)
    if ll.ndim != 2:
        raise SizeError(f"loglik must be N x S, got shape {ll.shape}")
    if not np.all(np.isfinite(ll)):
        raise SizeError("loglik contains non-finite entries")
    n_obs, n_draws = ll.shape
    if row_ids and len(row_ids) != n_obs:
        raise SizeError(f"{len(row_ids)} row ids for {n_obs} observations")

    if n_obs and n_draws < MIN_TAIL_DRAWS:
        _warn_truncated(n_draws)
    pointwise = np.empty(n_obs)
    pareto_k = np.empty(n_obs)
    for i in range(n_obs):
        weights, k = psis_smooth(-ll[i], warn=False)
        with np.errstate(divide="ignore"):
            log_w = np.log(weights)
        pointwise[i] = log_sum_exp(log_w + ll[i])
        pareto_k[i] = k

    lpd_i = log_sum_exp(ll, axis=1) - np.log(n_draws) if n_obs else np.zeros(0)
    n_high_k = int(np.sum(pareto_k > K_WARN))
    if n_high_k:
        logger.warning(
            "%d of %d observations have Pareto k > %.1f; their LOO estimates are unreliable",
            n_high_k, n_obs, K_WARN,
        )
    elpd = float(np.sum(pointwise))
    lpd = float(np.sum(lpd_i))
    return LooResult(
        elpd_loo=elpd,
        se_elpd=float(np.sqrt(n_obs * np.var(pointwise))) if n_obs else 0.0,
        pointwise_elpd=pointwise,
        pareto_k=pareto_k,
        n_high_k=n_high_k,
        lpd=lpd,
        p_loo=lpd - elpd,
        row_ids=tuple(row_ids),
    )


@dataclass
class CompareRow:
    name: str
    elpd_loo: float
    elpd_diff: float
    se_diff: float
    p_loo: float = 0.0


@dataclass
class CompareResult:
    rows: list[CompareRow]

    def to_text(self) -> str:
        width = max([len(r.name) for r in self.rows] + [5])
        lines = [f"{'Model':<{width}} {'elpd_diff':>10} {'se_diff':>8}"]
        for r in self.rows:
            lines.append(f"{r.name:<{width}} {r.elpd_diff:>10.1f} {r.se_diff:>8.1f}")
        return "\n".join(lines) + "\n"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.name, r.elpd_loo, r.elpd_diff, r.se_diff, r.p_loo) for r in self.rows],
            columns=["Model", "elpd_loo", "elpd_diff", "se_diff", "p_loo"],
        )

    def to_json(self) -> str:
        return json.dumps({"rows": [r.__dict__ for r in self.rows]}, indent=2)


def compare(results: Mapping[str, LooResult]) -> CompareResult:
    """
    Rank models by elpd_loo, best first, with differences against the best model.

    se_diff is sqrt(N * var(pointwise differences)), 0 for the best row.

    Raises:
        ComparisonError: Results cover different observations.
    """
    if len(results) < 2:
        raise ComparisonError("compare needs at least two models")
    items = list(results.items())
    first_name, first = items[0]
    for name, res in items[1:]:
        if res.n_obs != first.n_obs:
            raise ComparisonError(
                f"'{name}' has {res.n_obs} observations, '{first_name}' has {first.n_obs}"
            )
        if res.row_ids and first.row_ids and res.row_ids != first.row_ids:
            raise ComparisonError(f"'{name}' and '{first_name}' were fitted on different rows")

    ranked = sorted(items, key=lambda item: -item[1].elpd_loo)
    best_name, best = ranked[0]
    rows = [CompareRow(best_name, best.elpd_loo, 0.0, 0.0, best.p_loo)]
    for name, res in ranked[1:]:
        diff = res.pointwise_elpd - best.pointwise_elpd
        rows.append(
            CompareRow(
                name=name,
                elpd_loo=res.elpd_loo,
                elpd_diff=res.elpd_loo - best.elpd_loo,
                se_diff=float(np.sqrt(res.n_obs * np.var(diff))),
                p_loo=res.p_loo,
            )
        )
    return CompareResult(rows=rows)
