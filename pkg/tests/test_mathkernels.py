from __future__ import annotations

import numpy as np
import pytest
from scipy import special

from src.core.errors import DomainError, SizeError
from src.stats.mathkernels import (
    digamma,
    log_beta,
    log_gamma,
    log_sigmoid,
    log_sum_exp,
    sigmoid,
    weighted_quantile,
)

GRID = np.concatenate([np.geomspace(1e-3, 0.5, 40), np.linspace(0.5, 200.0, 400)])


def test_log_gamma_matches_scipy():
    np.testing.assert_allclose(log_gamma(GRID), special.gammaln(GRID), rtol=1e-10, atol=1e-12)


def test_log_gamma_half():
    assert log_gamma(0.5) == pytest.approx(0.5 * np.log(np.pi), abs=1e-14)
    assert isinstance(log_gamma(3.0), float)


@pytest.mark.parametrize("bad", [0.0, -1.5, np.nan, np.inf])
def test_log_gamma_rejects_out_of_domain(bad):
    with pytest.raises(DomainError):
        log_gamma(bad)


def test_domain_error_is_value_error():
    with pytest.raises(ValueError):
        digamma(np.array([1.0, -2.0]))


def test_digamma_matches_scipy():
    np.testing.assert_allclose(digamma(GRID), special.digamma(GRID), rtol=1e-10, atol=1e-12)
    assert digamma(1.0) == pytest.approx(-np.euler_gamma, rel=1e-12)


def test_log_beta_matches_scipy():
    rng = np.random.default_rng(3)
    a = rng.uniform(1e-2, 50, 200)
    b = rng.uniform(1e-2, 50, 200)
    np.testing.assert_allclose(log_beta(a, b), special.betaln(a, b), rtol=1e-10, atol=1e-11)


def test_log_sigmoid_stable_on_both_tails():
    assert log_sigmoid(-800.0) == pytest.approx(-800.0)
    assert log_sigmoid(800.0) == 0.0
    z = np.linspace(-30, 30, 61)
    np.testing.assert_allclose(log_sigmoid(z), -np.logaddexp(0.0, -z), rtol=1e-12)


def test_sigmoid_symmetry():
    z = np.linspace(-50, 50, 101)
    np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0, atol=1e-15)
    assert sigmoid(0.0) == 0.5


def test_log_sum_exp_no_overflow():
    assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000.0 + np.log(2.0))
    assert log_sum_exp([-np.inf, 0.0]) == 0.0
    assert log_sum_exp([-np.inf, -np.inf]) == -np.inf


def test_log_sum_exp_axis_matches_scipy():
    rng = np.random.default_rng(0)
    v = rng.normal(scale=50, size=(7, 11))
    np.testing.assert_allclose(log_sum_exp(v, axis=1), special.logsumexp(v, axis=1))
    np.testing.assert_allclose(log_sum_exp(v, axis=0), special.logsumexp(v, axis=0))


def test_log_sum_exp_empty_raises():
    with pytest.raises(SizeError):
        log_sum_exp([])


@pytest.mark.parametrize("q", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_weighted_quantile_equal_weights_matches_numpy(q):
    values = np.random.default_rng(1).normal(size=57)
    got = weighted_quantile(values, np.ones_like(values), q)
    assert got == pytest.approx(np.quantile(values, q))


def test_weighted_quantile_ignores_zero_weights():
    assert weighted_quantile([1.0, 2.0, 100.0], [1.0, 1.0, 0.0], 1.0) == 2.0


def test_weighted_quantile_validates():
    with pytest.raises(DomainError):
        weighted_quantile([1.0], [1.0], 1.5)
    with pytest.raises(SizeError):
        weighted_quantile([1.0, 2.0], [1.0], 0.5)
