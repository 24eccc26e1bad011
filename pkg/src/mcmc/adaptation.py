"""
Warmup adaptation: dual-averaging step size and a windowed diagonal inverse mass matrix.

Warmup is split into a fast initial buffer (step size only), a run of doubling slow
windows where the inverse mass is estimated from draw variances, and a fast terminal
buffer. At the end of every slow window the variance accumulator is reset, so each
estimate only sees draws from its own window.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np

from src.mcmc.integrator import hamiltonian, leapfrog

logger = logging.getLogger(__name__)

INIT_BUFFER = 75
TERM_BUFFER = 50
BASE_WINDOW = 25
MASS_FLOOR = 1e-10


class DualAveraging:
    """
    Dual averaging of log step size toward a target acceptance statistic.

    Feed g = target_accept - accept_stat each iteration; the averaged iterate
    x_avg is the log step size used after warmup.
    """

    def __init__(
        self, prox_center: float = 0.0, t0: float = 10, kappa: float = 0.75, gamma: float = 0.05
    ):
        self.prox_center = prox_center
        self.t0 = t0
        self.kappa = kappa
        self.gamma = gamma
        self.reset()

    def reset(self) -> None:
        self._x_t = self.prox_center
        self._x_avg = 0.0
        self._g_avg = 0.0
        self._t = 0

    def step(self, g: float) -> None:
        self._t += 1
        self._g_avg = (1 - 1 / (self._t + self.t0)) * self._g_avg + g / (self._t + self.t0)
        self._x_t = self.prox_center - (self._t**0.5) / self.gamma * self._g_avg
        weight_t = self._t ** (-self.kappa)
        self._x_avg = (1 - weight_t) * self._x_avg + weight_t * self._x_t

    def get_state(self) -> tuple[float, float]:
        return self._x_t, self._x_avg

    @property
    def iteration(self) -> int:
        return self._t

    @property
    def g_avg(self) -> float:
        return self._g_avg


def warmup_windows(warmup_iters: int) -> list[int]:
    """
    Iteration indices at which slow windows end.

    1000 warmup iterations give [100, 150, 250, 450, 950]: windows of 25, 50, 100 and
    200 draws, with the last window stretched to reach the terminal buffer.
    """
    last = warmup_iters - TERM_BUFFER
    ends: list[int] = []
    start, size = INIT_BUFFER, BASE_WINDOW
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append(end)
        start, size = end, 2 * size
    return ends


@dataclass
class AdaptationState:
    step_size: float
    inv_mass_diag: np.ndarray
    log_step_bar: float = 0.0
    h_bar: float = 0.0
    iteration: int = 0
    window_ends: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["inv_mass_diag"] = [float(v) for v in self.inv_mass_diag]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> AdaptationState:
        values = dict(data)
        values["inv_mass_diag"] = np.asarray(values["inv_mass_diag"], dtype=float)
        return cls(**values)


class WelfordVariance:
    def __init__(self, dim: int):
        self.dim = dim
        self.reset()

    def reset(self) -> None:
        self.n = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def variance(self) -> np.ndarray:
        return self.m2 / (self.n - 1)


class WarmupAdapter:
    """
    Stateful warmup controller for one chain.

    Call learn_step_size() after every warmup transition and add_sample() with the new
    draw; add_sample() returns True when a slow window closed and the inverse mass changed.
    """

    def __init__(self, dim: int, warmup_iters: int, target_accept: float, step_size: float):
        self.dim = dim
        self.warmup_iters = warmup_iters
        self.target_accept = target_accept
        self.window_ends = warmup_windows(warmup_iters)
        self.window_start = INIT_BUFFER
        self.inv_mass = np.ones(dim)
        self._variance = WelfordVariance(dim)
        self._dual = DualAveraging()
        self.restart(step_size)

    def restart(self, step_size: float) -> None:
        self.step_size = step_size
        self._dual.prox_center = float(np.log(10.0 * step_size))
        self._dual.reset()

    def learn_step_size(self, accept_stat: float) -> float:
        self._dual.step(self.target_accept - accept_stat)
        x_t, _ = self._dual.get_state()
        self.step_size = float(np.exp(x_t))
        return self.step_size

    def in_slow_window(self, iteration: int) -> bool:
        return bool(self.window_ends) and INIT_BUFFER <= iteration < self.window_ends[-1]

    def add_sample(self, iteration: int, theta: np.ndarray) -> bool:
        if not self.in_slow_window(iteration):
            return False
        self._variance.add(theta)
        if iteration + 1 not in self.window_ends:
            return False
        self.inv_mass = regularized_variance(self._variance.variance(), self._variance.n)
        logger.debug(
            "Mass window %d-%d closed: inv_mass range [%.3g, %.3g]",
            self.window_start, iteration + 1, self.inv_mass.min(), self.inv_mass.max(),
        )
        self.window_start = iteration + 1
        self._variance.reset()
        return True

    def final_state(self) -> AdaptationState:
        _, x_avg = self._dual.get_state()
        if self._dual.iteration:
            self.step_size = float(np.exp(x_avg))
        return AdaptationState(
            step_size=self.step_size,
            inv_mass_diag=self.inv_mass.copy(),
            log_step_bar=float(x_avg),
            h_bar=float(self._dual.g_avg),
            iteration=self._dual.iteration,
            window_ends=list(self.window_ends),
        )


def regularized_variance(variance: np.ndarray, n: int) -> np.ndarray:
    """Shrink window variances toward 1e-3; coordinates without spread get MASS_FLOOR."""
    variance = np.asarray(variance, dtype=float)
    degenerate = ~(variance > 0)
    if np.any(degenerate):
        logger.warning(
            "Zero sample variance in %d coordinate(s) during mass adaptation; "
            "flooring inverse mass at %g",
            int(np.sum(degenerate)), MASS_FLOOR,
        )
        variance = np.where(degenerate, 0.0, variance)
    shrunk = (n / (n + 5.0)) * variance + 1e-3 * (5.0 / (n + 5.0))
    return np.where(degenerate, MASS_FLOOR, np.maximum(shrunk, MASS_FLOOR))


def find_reasonable_epsilon(
    log_density_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    theta: np.ndarray,
    logp: float,
    grad: np.ndarray,
    inv_mass: np.ndarray,
    rng: np.random.Generator,
    step_size: float = 1.0,
    max_doublings: int = 100,
) -> float:
    """Double or halve the step size until one leapfrog step crosses acceptance 1/2."""
    momentum = rng.standard_normal(theta.shape[0]) / np.sqrt(inv_mass)
    h0 = hamiltonian(logp, momentum, inv_mass)

    def log_accept(eps: float) -> float:
        _, p1, logp1, _ = leapfrog(log_density_and_grad, theta, momentum, grad, eps, inv_mass)
        delta = h0 - hamiltonian(logp1, p1, inv_mass)
        return delta if np.isfinite(delta) else -np.inf

    direction = 1 if log_accept(step_size) > np.log(0.5) else -1
    for _ in range(max_doublings):
        step_size *= 2.0**direction
        if (log_accept(step_size) > np.log(0.5)) != (direction == 1):
            break
    return step_size
