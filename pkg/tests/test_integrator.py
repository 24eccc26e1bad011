from __future__ import annotations

import numpy as np
import pytest

from src.mcmc.integrator import hamiltonian, kinetic_energy, leapfrog
from tests.conftest import StandardNormal


def flat(theta: np.ndarray) -> tuple[float, np.ndarray]:
    return 0.0, np.zeros_like(theta)


def test_free_particle_drifts():
    theta, p = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    inv_mass = np.array([2.0, 0.5])
    theta1, p1, logp1, _ = leapfrog(flat, theta, p, np.zeros(2), 0.1, inv_mass)
    np.testing.assert_allclose(theta1, theta + 0.1 * inv_mass * p)
    np.testing.assert_array_equal(p1, p)
    assert logp1 == 0.0


def test_leapfrog_is_reversible():
    target = StandardNormal(dim=3, scale=[1.0, 2.0, 0.5])
    theta = np.array([0.3, -1.0, 0.2])
    p = np.array([1.0, 0.4, -0.7])
    inv_mass = np.array([1.0, 3.0, 0.3])
    _, grad = target.log_density_and_grad(theta)

    t, m, g = theta, p, grad
    for _ in range(20):
        t, m, _, g = leapfrog(target.log_density_and_grad, t, m, g, 0.1, inv_mass)
    m = -m
    for _ in range(20):
        t, m, _, g = leapfrog(target.log_density_and_grad, t, m, g, 0.1, inv_mass)
    np.testing.assert_allclose(t, theta, atol=1e-10)
    np.testing.assert_allclose(-m, p, atol=1e-10)


def test_negative_step_runs_backward():
    target = StandardNormal()
    theta, p = np.array([0.5, 0.1]), np.array([-0.3, 0.8])
    _, grad = target.log_density_and_grad(theta)
    t1, p1, _, g1 = leapfrog(target.log_density_and_grad, theta, p, grad, 0.2, np.ones(2))
    t0, p0, _, _ = leapfrog(target.log_density_and_grad, t1, p1, g1, -0.2, np.ones(2))
    np.testing.assert_allclose(t0, theta, atol=1e-12)
    np.testing.assert_allclose(p0, p, atol=1e-12)


def _max_energy_error(step_size: float) -> float:
    target = StandardNormal(dim=1)
    theta, p = np.array([1.0]), np.array([0.5])
    inv_mass = np.ones(1)
    logp, grad = target.log_density_and_grad(theta)
    h0 = hamiltonian(logp, p, inv_mass)
    worst = 0.0
    for _ in range(int(round(2.0 / step_size))):
        theta, p, logp, grad = leapfrog(
            target.log_density_and_grad, theta, p, grad, step_size, inv_mass
        )
        worst = max(worst, abs(hamiltonian(logp, p, inv_mass) - h0))
    return worst


def test_energy_error_is_second_order():
    ratio = _max_energy_error(0.1) / _max_energy_error(0.05)
    assert 3.0 < ratio < 5.0


def test_energy_helpers():
    assert kinetic_energy(np.array([2.0]), np.array([0.5])) == pytest.approx(1.0)
    assert hamiltonian(-1.0, np.array([2.0]), np.array([0.5])) == pytest.approx(2.0)
    assert hamiltonian(np.nan, np.zeros(1), np.ones(1)) == np.inf
    assert hamiltonian(-np.inf, np.zeros(1), np.ones(1)) == np.inf
