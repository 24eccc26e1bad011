"""Leapfrog integration of Hamiltonian dynamics with a diagonal mass matrix."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

LogDensityAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def leapfrog(
    log_density_and_grad: LogDensityAndGrad,
    theta: np.ndarray,
    momentum: np.ndarray,
    grad: np.ndarray,
    step_size: float,
    inv_mass: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """
    One step: half-kick, drift, half-kick.

    `grad` is the gradient of the log density at `theta` (the negative of the force
    of the potential). A negative step size integrates backward in time.

    Returns:
        (theta', momentum', log density at theta', gradient at theta')
    """
    p = momentum + 0.5 * step_size * grad
    theta_new = theta + step_size * inv_mass * p
    logp_new, grad_new = log_density_and_grad(theta_new)
    p = p + 0.5 * step_size * grad_new
    return theta_new, p, float(logp_new), grad_new


def kinetic_energy(momentum: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(momentum @ (inv_mass * momentum))


def hamiltonian(logp: float, momentum: np.ndarray, inv_mass: np.ndarray) -> float:
    """Total energy; non-finite values are reported as +inf."""
    with np.errstate(invalid="ignore", over="ignore"):
        h = -logp + kinetic_energy(momentum, inv_mass)
    return h if np.isfinite(h) else np.inf
