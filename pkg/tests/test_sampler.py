from __future__ import annotations

import logging

import numpy as np
import pytest
from scipy import integrate, stats

from src.core.errors import DivergenceError, InitializationError
from src.core.schemas import SamplerConfig
from src.data.ingest import INTERCEPT, DesignMatrix
from src.mcmc.adaptation import AdaptationState
from src.mcmc.sampler import (
    STAT_FIELDS,
    PhasePoint,
    _check_divergences,
    adapt_warmup,
    build_trajectory,
    chain_rng,
    initialize,
    run_chain,
    sample,
)
from src.stats.model import ModelSpec, Posterior
from tests.conftest import Nowhere, StandardNormal, make_samples

FAST = SamplerConfig(chains=2, warmup_iters=300, sampling_iters=500, seed=3)


def test_standard_normal_moments():
    samples = sample(StandardNormal(dim=2, scale=[1.0, 4.0]), FAST, max_workers=1)
    assert samples.draws.shape == (2, 500, 2)
    flat = samples.flat()
    np.testing.assert_allclose(flat.mean(axis=0), [0.0, 0.0], atol=0.3)
    np.testing.assert_allclose(flat.std(axis=0), [1.0, 4.0], rtol=0.15)
    # Mass adaptation picks up the scale difference.
    assert samples.adaptation[0].inv_mass_diag[1] > 4 * samples.adaptation[0].inv_mass_diag[0]


def test_sampler_stats_are_recorded():
    samples = sample(StandardNormal(), FAST, max_workers=1)
    assert set(samples.stats) == set(STAT_FIELDS)
    for name in STAT_FIELDS:
        assert samples.stats[name].shape == (2, 500)
    accept = samples.stats["accept_stat"]
    assert np.all((accept >= 0) & (accept <= 1))
    assert samples.stats["tree_depth"].max() <= FAST.max_tree_depth
    assert np.all(samples.stats["n_leapfrog"] >= 1)
    assert samples.divergent_count == 0


def test_same_seed_same_draws():
    a = sample(StandardNormal(), FAST, max_workers=1)
    b = sample(StandardNormal(), FAST, max_workers=1)
    np.testing.assert_array_equal(a.draws, b.draws)
    c = sample(StandardNormal(), FAST.model_copy(update={"seed": 4}), max_workers=1)
    assert not np.array_equal(a.draws, c.draws)


@pytest.mark.slow
def test_draws_do_not_depend_on_worker_count():
    serial = sample(StandardNormal(), FAST, max_workers=1)
    pooled = sample(StandardNormal(), FAST, max_workers=2)
    np.testing.assert_array_equal(serial.draws, pooled.draws)


def test_chain_streams_differ():
    assert chain_rng(1, 0).uniform() != chain_rng(1, 1).uniform()


def test_static_step_at_depth_zero():
    target = StandardNormal()
    theta = np.array([0.5, -0.5])
    logp, grad = target.log_density_and_grad(theta)
    state = AdaptationState(step_size=0.3, inv_mass_diag=np.ones(2))
    _, info = build_trajectory(
        target, PhasePoint(theta, logp, grad), state, np.random.default_rng(0), max_tree_depth=0
    )
    assert (info.tree_depth, info.n_leapfrog) == (0, 1)


def test_huge_step_diverges():
    target = StandardNormal(scale=1e-3)
    theta = np.array([1e-3, 1e-3])
    logp, grad = target.log_density_and_grad(theta)
    state = AdaptationState(step_size=10.0, inv_mass_diag=np.ones(2))
    _, info = build_trajectory(target, PhasePoint(theta, logp, grad), state,
                               np.random.default_rng(0))
    assert info.divergent is True
    assert info.tree_depth == 0


def test_initialization_failure():
    with pytest.raises(InitializationError):
        initialize(Nowhere(), FAST, np.random.default_rng(0))


def test_divergence_budget():
    divergent = np.zeros((2, 100), dtype=bool)
    divergent[0, :60] = True
    samples = make_samples(np.zeros((2, 100, 1)), ["x0"], divergent=divergent)
    with pytest.raises(DivergenceError) as exc:
        _check_divergences(samples, SamplerConfig(adapt=False))
    assert exc.value.payload["divergent"] == 60
    assert exc.value.payload["per_chain"] == [60, 0]


def test_few_divergences_only_warn(caplog):
    divergent = np.zeros((2, 100), dtype=bool)
    divergent[1, 3] = True
    samples = make_samples(np.zeros((2, 100, 1)), ["x0"], divergent=divergent)
    with caplog.at_level(logging.WARNING):
        _check_divergences(samples, SamplerConfig(adapt=False))
    assert "diverged" in caplog.text


def test_intercept_only_posterior_matches_quadrature():
    rng = np.random.default_rng(42)
    y = rng.binomial(1, 0.8, 200)
    dm = DesignMatrix(
        x=np.ones((200, 1)), column_names=(INTERCEPT,), y=y, trials=np.ones(200, dtype=int)
    )
    target = Posterior(ModelSpec.for_design(dm, "logistic"), dm)

    def density(b, k=0):
        return b**k * np.exp(target.log_density(np.array([b])) - mode_logp)

    mode_logp = max(target.log_density(np.array([b])) for b in np.linspace(-2, 6, 801))
    z = integrate.quad(density, -5, 10, points=[1.4])[0]
    mean = integrate.quad(density, -5, 10, args=(1,), points=[1.4])[0] / z
    sd = np.sqrt(integrate.quad(density, -5, 10, args=(2,), points=[1.4])[0] / z - mean**2)

    config = SamplerConfig(chains=4, warmup_iters=500, sampling_iters=1000, seed=9)
    draws = sample(target, config, max_workers=1).flat()[:, 0]
    assert abs(draws.mean() - mean) < 0.02
    assert abs(draws.std() - sd) / sd < 0.05


def test_higher_target_accept_gives_smaller_steps():
    target = StandardNormal(dim=3, scale=[1.0, 2.0, 0.5])
    steps = {}
    for accept in (0.6, 0.99):
        config = SamplerConfig(warmup_iters=300, target_accept=accept, seed=1)
        rng = chain_rng(config.seed, 0)
        _, state = adapt_warmup(target, initialize(target, config, rng), config, rng)
        steps[accept] = state.step_size
    assert steps[0.99] < steps[0.6]


def test_standard_normal_draws_pass_ks():
    config = SamplerConfig(chains=4, warmup_iters=500, sampling_iters=1000, seed=11)
    samples = sample(StandardNormal(dim=1), config, max_workers=1)
    assert stats.kstest(samples.flat()[:, 0], "norm").pvalue > 0.01


def test_chain_does_not_depend_on_other_chains():
    target = StandardNormal(dim=2, scale=[1.0, 2.0])
    both = sample(target, FAST, max_workers=1)
    alone = run_chain(target, FAST, 1)
    np.testing.assert_array_equal(alone.draws, both.draws[1])
    np.testing.assert_array_equal(alone.stats["accept_stat"], both.stats["accept_stat"][1])


def test_post_warmup_acceptance_is_near_target():
    # Dual averaging settles on the averaged step, which runs somewhat above target_accept.
    config = SamplerConfig(chains=4, warmup_iters=1000, sampling_iters=1000, seed=2)
    samples = sample(StandardNormal(dim=2, scale=[1.0, 3.0]), config, max_workers=1)
    mean_accept = float(samples.stats["accept_stat"].mean())
    assert config.target_accept - 0.05 <= mean_accept <= 0.97


class _WithExactTail(StandardNormal):
    def __init__(self):
        super().__init__(dim=1)
        self.param_names = ["x0", "tail"]

    def draw_exact(self, rng, n):
        return rng.normal(10.0, 1.0, (n, 1))


def test_exact_parameters_are_appended_to_draws():
    samples = sample(_WithExactTail(), FAST, max_workers=1)
    assert samples.draws.shape == (2, 500, 2)
    assert samples.param_names == ["x0", "tail"]
    assert abs(samples.param("tail").mean() - 10.0) < 0.2
    assert abs(samples.param("x0").mean()) < 0.3
