"""
Diagnostics: rank-normalized split Rhat, bulk/tail ESS and the posterior summary table.

Every statistic works on a (chains, draws) array for one parameter. Chains are split in
half (the middle draw is dropped for odd lengths) before any between-chain comparison.

Usage:
    table = summarize(samples)
    print(table.to_text())
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy import fft, stats

from src.core.errors import SizeError

if TYPE_CHECKING:
    from src.mcmc.sampler import SampleSet

logger = logging.getLogger(__name__)

ESS_WARN = 400
RHAT_WARN = 1.01
# Lower bound on the integrated autocorrelation time: ESS <= 1.5 x draws.
TAU_FLOOR = 1.0 / 1.5
SUMMARY_COLUMNS = (
    "Estimate",
    "Est.Error",
    "95% CI Lower",
    "95% CI Upper",
    "Rhat",
    "ESS Bulk",
    "ESS Tail",
)


def _as_chains(draws: ArrayLike) -> np.ndarray:
    ary = np.asarray(draws, dtype=float)
    if ary.ndim == 1:
        ary = ary[None, :]
    if ary.ndim != 2:
        raise SizeError(f"expected a (chains, draws) array, got shape {ary.shape}")
    return ary


def split_chains(draws: ArrayLike) -> np.ndarray:
    ary = _as_chains(draws)
    half = ary.shape[1] // 2
    if half < 4:
        raise SizeError(f"need at least 8 draws per chain to split, got {ary.shape[1]}")
    return np.concatenate([ary[:, :half], ary[:, -half:]], axis=0)


def _is_constant(ary: np.ndarray) -> bool:
    return bool(np.all(ary == ary.flat[0]))


def z_scale(ary: np.ndarray) -> np.ndarray:
    """Joint average ranks mapped through the normal quantile at (r - 3/8) / (S + 1/4)."""
    ranks = stats.rankdata(ary, method="average").reshape(ary.shape)
    return stats.norm.ppf((ranks - 0.375) / (ary.size + 0.25))


def _rhat(ary: np.ndarray) -> float:
    n = ary.shape[1]
    chain_mean = ary.mean(axis=1)
    within = np.mean(ary.var(axis=1, ddof=1))
    between = n * np.var(chain_mean, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.sqrt((between / within + n - 1) / n))


def split_rank_rhat(draws: ArrayLike) -> float:
    """
    Max of the bulk and folded rank-normalized split Rhat.

    Folding happens on the normal scores, so the value is unchanged by any strictly
    monotone transform of the draws.
    """
    split = split_chains(draws)
    if _is_constant(split):
        logger.warning("Rhat undefined: all draws are identical")
        return float("nan")
    z = z_scale(split)
    folded = np.abs(z - np.median(z))
    return max(_rhat(z), _rhat(z_scale(folded)))


def autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via zero-padded FFT."""
    n = x.shape[-1]
    centered = x - x.mean(axis=-1, keepdims=True)
    size = fft.next_fast_len(2 * n)
    spectrum = fft.rfft(centered, n=size, axis=-1)
    return fft.irfft(spectrum * np.conjugate(spectrum), n=size, axis=-1)[..., :n] / n


def _ess(ary: np.ndarray) -> float:
    """ESS with Geyer's initial positive and monotone sequence truncation."""
    n_chain, n_draw = ary.shape
    acov = autocovariance(ary)
    mean_var = np.mean(acov[:, 0]) * n_draw / (n_draw - 1.0)
    var_plus = mean_var * (n_draw - 1.0) / n_draw
    if n_chain > 1:
        var_plus += np.var(ary.mean(axis=1), ddof=1)

    rho = np.zeros(n_draw)
    rho_even = 1.0
    rho[0] = rho_even
    rho_odd = 1.0 - (mean_var - np.mean(acov[:, 1])) / var_plus
    rho[1] = rho_odd

    t = 1
    while t < n_draw - 3 and rho_even + rho_odd > 0.0:
        rho_even = 1.0 - (mean_var - np.mean(acov[:, t + 1])) / var_plus
        rho_odd = 1.0 - (mean_var - np.mean(acov[:, t + 2])) / var_plus
        if rho_even + rho_odd >= 0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0:
        rho[max_t + 1] = rho_even

    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2

    tau = -1.0 + 2.0 * np.sum(rho[: max_t + 1]) + np.sum(rho[max_t + 1 : max_t + 2])
    tau = max(tau, TAU_FLOOR)
    return float(n_chain * n_draw / tau)


def ess_bulk(draws: ArrayLike) -> float:
    split = split_chains(draws)
    if _is_constant(split):
        logger.warning("ESS undefined: all draws are identical")
        return float("nan")
    return _ess(z_scale(split))


def ess_tail(draws: ArrayLike) -> float:
    """Minimum ESS of the 5% and 95% quantile indicators."""
    split = split_chains(draws)
    if _is_constant(split):
        logger.warning("ESS undefined: all draws are identical")
        return float("nan")
    q05, q95 = np.quantile(split, [0.05, 0.95])
    values = []
    for indicator in (split <= q05, split >= q95):
        ind = indicator.astype(float)
        values.append(float("nan") if _is_constant(ind) else _ess(ind))
    return float(np.nanmin(values)) if not np.all(np.isnan(values)) else float("nan")


# --- Summary table ---


@dataclass
class SummaryRow:
    name: str
    estimate: float
    est_error: float
    ci_lower: float
    ci_upper: float
    rhat: float
    ess_bulk: float
    ess_tail: float

    def values(self) -> list[float]:
        return [
            self.estimate, self.est_error, self.ci_lower, self.ci_upper,
            self.rhat, self.ess_bulk, self.ess_tail,
        ]


@dataclass
class SummaryTable:
    rows: list[SummaryRow]

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.rows]

    def row(self, name: str) -> SummaryRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [r.values() for r in self.rows], index=self.names, columns=list(SUMMARY_COLUMNS)
        )

    def to_text(self) -> str:
        """Aligned table; estimates and Rhat at 2 decimals, ESS as integers."""
        width = max([len(n) for n in self.names] + [8])
        header = " " * width + "".join(f" {c:>12}" for c in SUMMARY_COLUMNS)
        lines = [header]
        for r in self.rows:
            cells = [_fmt(v, 2) for v in r.values()[:5]] + [_fmt(v, 0) for v in r.values()[5:]]
            lines.append(f"{r.name:<{width}}" + "".join(f" {c:>12}" for c in cells))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index_label="Variable", float_format="%.17g")

    def to_json(self) -> str:
        rows = [
            {k: _finite_or_none(v) for k, v in asdict(r).items()}
            for r in self.rows
        ]
        return json.dumps({"columns": list(SUMMARY_COLUMNS), "rows": rows}, indent=2)


def _finite_or_none(value):
    return None if isinstance(value, float) and not np.isfinite(value) else value


def _fmt(value: float, decimals: int) -> str:
    if not np.isfinite(value):
        return "NA"
    if decimals == 0:
        return str(int(round(value)))
    return f"{value:.{decimals}f}"


def summarize_draws(name: str, draws: ArrayLike) -> SummaryRow:
    ary = _as_chains(draws)
    flat = ary.reshape(-1)
    if flat.size == 0:
        raise SizeError(f"no draws for {name}")
    lower, upper = np.quantile(flat, [0.025, 0.975])
    if ary.shape[1] < 8:
        logger.warning("%s: %d draws per chain is too few for Rhat and ESS", name, ary.shape[1])
        rhat = bulk = tail = float("nan")
    else:
        rhat, bulk, tail = split_rank_rhat(ary), ess_bulk(ary), ess_tail(ary)
    return SummaryRow(
        name=name,
        estimate=float(np.mean(flat)),
        est_error=float(np.std(flat, ddof=1)) if flat.size > 1 else 0.0,
        ci_lower=float(lower),
        ci_upper=float(upper),
        rhat=rhat,
        ess_bulk=bulk,
        ess_tail=tail,
    )


def summarize(samples: SampleSet, names: list[str] | None = None) -> SummaryTable:
    """
    One row per parameter in sampling order, on the natural scale.

    log_phi is reported as phi = exp(log_phi). Rows with Rhat above 1.01 or an ESS
    below 400 are logged as warnings.
    """
    labels = list(names) if names is not None else list(samples.param_names)
    if len(labels) != samples.dim:
        raise SizeError(f"{len(labels)} names for {samples.dim} parameters")
    rows = []
    for j, label in enumerate(labels):
        draws = samples.draws[:, :, j]
        if label == "log_phi":
            label, draws = "phi", np.exp(draws)
        row = summarize_draws(label, draws)
        _warn_on(row)
        rows.append(row)
    return SummaryTable(rows=rows)


def _warn_on(row: SummaryRow) -> None:
    if np.isfinite(row.rhat) and row.rhat > RHAT_WARN:
        logger.warning(
            "%s: Rhat %.3f > %.2f, chains have not mixed", row.name, row.rhat, RHAT_WARN
        )
    low = [
        label
        for label, value in (("bulk", row.ess_bulk), ("tail", row.ess_tail))
        if np.isfinite(value) and value < ESS_WARN
    ]
    if low:
        logger.warning(
            "%s: ESS %s below %d (bulk %.0f, tail %.0f)",
            row.name, "/".join(low), ESS_WARN, row.ess_bulk, row.ess_tail,
        )
