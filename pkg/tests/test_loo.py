from __future__ import annotations

import logging

import numpy as np
import pytest
from scipy import stats

from src.core.errors import ComparisonError, SizeError
from src.core.schemas import PriorSpec, SamplerConfig
from src.data.ingest import INTERCEPT, DesignMatrix
from src.mcmc.sampler import sample
from src.stats.loo import (
    K_SENTINEL,
    LooResult,
    compare,
    elpd_loo,
    gpd_fit,
    psis_smooth,
    tail_length,
)
from src.stats.model import ModelSpec, Posterior, pointwise_log_lik


def normal_model(n: int = 50, draws: int = 4000, seed: int = 0):
    """Known-variance normal mean with a flat prior: posterior and exact LOO in closed form."""
    rng = np.random.default_rng(seed)
    y = rng.normal(1.0, 1.0, n)
    mu = rng.normal(y.mean(), 1 / np.sqrt(n), draws)
    loglik = stats.norm.logpdf(y[:, None], mu[None, :], 1.0)
    loo_mean = (y.sum() - y) / (n - 1)
    exact = stats.norm.logpdf(y, loo_mean, np.sqrt(1 + 1 / (n - 1))).sum()
    return loglik, exact


def result(pointwise, name: str = "m", row_ids=()) -> LooResult:
    pointwise = np.asarray(pointwise, dtype=float)
    return LooResult(
        elpd_loo=float(pointwise.sum()),
        se_elpd=0.0,
        pointwise_elpd=pointwise,
        pareto_k=np.zeros_like(pointwise),
        n_high_k=0,
        row_ids=tuple(row_ids),
    )


@pytest.mark.parametrize("n,expected", [(1000, 95), (4000, 190), (100, 20), (25, 5)])
def test_tail_length(n, expected):
    assert tail_length(n) == expected


def test_gpd_fit_recovers_shape_and_scale():
    exceedances = np.sort(stats.genpareto.rvs(0.3, scale=2.0, size=5000, random_state=1))
    k, sigma = gpd_fit(exceedances)
    assert k == pytest.approx(0.3, abs=0.06)
    assert sigma == pytest.approx(2.0, rel=0.1)


def test_smoothed_weights_are_normalized():
    lw = np.random.default_rng(2).normal(size=1000)
    weights, k = psis_smooth(lw)
    assert weights.sum() == pytest.approx(1.0)
    assert np.all(weights >= 0)
    assert k < 0.7


def test_few_draws_fall_back_to_truncation(caplog):
    with caplog.at_level(logging.WARNING):
        weights, k = psis_smooth(np.arange(10.0))
    assert k == K_SENTINEL
    assert weights.sum() == pytest.approx(1.0)
    raw = np.exp(np.arange(10.0))
    assert weights.max() < raw.max() / raw.sum()
    assert weights.argmax() == 9
    assert "truncated" in caplog.text


def test_psis_rejects_bad_input():
    with pytest.raises(SizeError):
        psis_smooth(np.array([]))
    with pytest.raises(SizeError):
        psis_smooth(np.array([0.0, np.inf] * 20))


def test_normal_model_matches_exact_loo():
    loglik, exact = normal_model()
    res = elpd_loo(loglik)
    assert res.elpd_loo == pytest.approx(exact, abs=0.3)
    assert res.p_loo == pytest.approx(1.0, abs=0.3)
    assert res.n_high_k == 0
    assert res.se_elpd > 0
    assert res.n_obs == 50


def test_heavy_tailed_ratios_are_flagged(caplog):
    loglik, _ = normal_model(n=5)
    loglik[0] = -np.random.default_rng(4).exponential(1.0, loglik.shape[1])
    with caplog.at_level(logging.WARNING):
        res = elpd_loo(loglik)
    assert res.pareto_k[0] > 0.7
    assert res.n_high_k >= 1
    assert "Pareto k" in caplog.text


def test_elpd_loo_input_checks():
    with pytest.raises(SizeError):
        elpd_loo(np.zeros(10))
    with pytest.raises(SizeError):
        elpd_loo(np.full((2, 30), np.nan))
    with pytest.raises(SizeError):
        elpd_loo(np.zeros((2, 30)), row_ids=("a",))


def test_compare_ranks_best_first():
    report = compare(
        {"lr_model": result([-1.0, -2.0, -1.5]), "bb_model": result([-1.0, -1.0, -1.2])}
    )
    assert [r.name for r in report.rows] == ["bb_model", "lr_model"]
    best, other = report.rows
    assert (best.elpd_diff, best.se_diff) == (0.0, 0.0)
    assert other.elpd_diff == pytest.approx(-1.3)
    assert other.se_diff == pytest.approx(np.sqrt(3 * np.var([0.0, -1.0, -0.3])))
    frame = report.to_frame()
    assert list(frame.columns) == ["Model", "elpd_loo", "elpd_diff", "se_diff", "p_loo"]
    assert "elpd_diff" in report.to_text().splitlines()[0]


def test_compare_with_itself_is_a_tie():
    res = result([-0.5, -0.7])
    report = compare({"a": res, "b": res})
    assert all(r.elpd_diff == 0.0 and r.se_diff == 0.0 for r in report.rows)


def test_compare_requires_matching_observations():
    with pytest.raises(ComparisonError):
        compare({"only": result([-1.0])})
    with pytest.raises(ComparisonError):
        compare({"a": result([-1.0, -1.0]), "b": result([-1.0])})
    with pytest.raises(ComparisonError):
        compare({"a": result([-1.0], row_ids=["x"]), "b": result([-1.0], row_ids=["y"])})


def test_constant_ratios_give_uniform_weights():
    weights, k = psis_smooth(np.zeros(100))
    np.testing.assert_allclose(weights, np.full(100, 0.01))
    assert k == K_SENTINEL


def test_single_draw_collapses_to_its_loglik():
    ll = np.array([[-0.3], [-1.7], [-0.9]])
    res = elpd_loo(ll)
    np.testing.assert_allclose(res.pointwise_elpd, ll[:, 0])
    assert res.p_loo == pytest.approx(0.0)


def _fit_loglik(spec: ModelSpec, train: DesignMatrix, score: DesignMatrix, config) -> np.ndarray:
    samples = sample(Posterior(spec, train), config, max_workers=1)
    return pointwise_log_lik(spec, score, samples)


def _rows(dm: DesignMatrix, keep) -> DesignMatrix:
    keep = np.asarray(keep, dtype=np.int64)
    return DesignMatrix(
        x=dm.x[keep], column_names=dm.column_names, y=dm.y[keep], trials=dm.trials[keep]
    )


@pytest.mark.slow
def test_psis_loo_matches_exact_refits():
    rng = np.random.default_rng(30)
    x = np.column_stack([np.ones(30), rng.normal(size=30)])
    y = rng.binomial(1, 1 / (1 + np.exp(-(x @ np.array([-0.3, 1.0])))))
    dm = DesignMatrix(x=x, column_names=(INTERCEPT, "x"), y=y, trials=np.ones(30))
    priors = PriorSpec(intercept_mean=0.0, intercept_sd=2.5, slope_mean=0.0, slope_sd=2.5)
    spec = ModelSpec.for_design(dm, "logistic", priors)
    config = SamplerConfig(chains=4, warmup_iters=500, sampling_iters=1000, seed=5)

    loo = elpd_loo(_fit_loglik(spec, dm, dm, config))

    exact = 0.0
    for i in range(dm.n_rows):
        held_out = _fit_loglik(spec, _rows(dm, np.delete(np.arange(30), i)), _rows(dm, [i]), config)
        exact += float(np.log(np.mean(np.exp(held_out))))
    assert abs(loo.elpd_loo - exact) <= 0.3


def _overdispersed(seed: int, n_rows: int = 100, trials: int = 20, phi: float = 2.0):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n_rows), rng.normal(size=n_rows)])
    mu = 1 / (1 + np.exp(-(x @ np.array([-0.5, 0.8]))))
    y = rng.binomial(trials, rng.beta(mu * phi, (1 - mu) * phi))
    return DesignMatrix(x=x, column_names=(INTERCEPT, "x"), y=y, trials=np.full(n_rows, trials))


@pytest.mark.slow
def test_beta_binomial_wins_on_overdispersed_counts():
    config = SamplerConfig(chains=2, warmup_iters=300, sampling_iters=500, seed=1)
    wins = 0
    for seed in range(10):
        dm = _overdispersed(seed)
        results = {
            family: elpd_loo(_fit_loglik(ModelSpec.for_design(dm, family), dm, dm, config))
            for family in ("binomial", "beta_binomial")
        }
        wins += compare(results).rows[0].name == "beta_binomial"
    assert wins >= 9


def test_families_tie_on_binary_rows():
    rng = np.random.default_rng(12)
    x = np.column_stack([np.ones(60), rng.normal(size=60)])
    y = rng.binomial(1, 1 / (1 + np.exp(-(x @ np.array([0.2, -0.7])))))
    dm = DesignMatrix(x=x, column_names=(INTERCEPT, "x"), y=y, trials=np.ones(60))
    priors = PriorSpec.beta_binomial()
    config = SamplerConfig(chains=2, warmup_iters=200, sampling_iters=300, seed=8)

    bernoulli = ModelSpec.for_design(dm, "logistic", priors)
    beta_binomial = ModelSpec.for_design(dm, "beta_binomial", priors)
    loglik = {
        "logistic": _fit_loglik(bernoulli, dm, dm, config),
        "beta_binomial": _fit_loglik(beta_binomial, dm, dm, config),
    }
    np.testing.assert_allclose(loglik["logistic"], loglik["beta_binomial"], rtol=0, atol=1e-12)

    result = compare({name: elpd_loo(ll) for name, ll in loglik.items()})
    assert [r.elpd_diff for r in result.rows] == pytest.approx([0.0, 0.0], abs=1e-9)
    assert result.rows[1].se_diff == pytest.approx(0.0, abs=1e-9)
