"""
Base Likelihood Family: abstract interface for the observation models.

To add a new family:
1. Create a file in src/families/ (e.g., poisson.py)
2. Subclass Family
3. Implement pointwise(), grad_eta(), mean() and draw()
4. Register with @register_family("name")
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod

import numpy as np

from src.core.errors import ConfigError, DesignError
from src.stats.mathkernels import log_gamma

logger = logging.getLogger(__name__)


class Family(ABC):
    """
    Base class for likelihood families with a logit link.

    All per-row methods take y and trials of shape (N,) and eta of shape (N,) or (N, S);
    outputs have the shape of eta.
    """

    # Registered name (e.g., "bernoulli_logit").
    name: str = ""
    # True when the family carries the log-precision parameter log_phi.
    has_dispersion: bool = False

    def validate(self, y: np.ndarray, trials: np.ndarray) -> None:
        """Raise when the data cannot come from this family."""
        bad = np.flatnonzero(y > trials)
        if bad.size:
            i = int(bad[0])
            raise DesignError(f"row {i + 1}: successes {y[i]} exceed trials {trials[i]}")

    @abstractmethod
    def pointwise(
        self, y: np.ndarray, trials: np.ndarray, eta: np.ndarray, log_phi: float | np.ndarray = 0.0
    ) -> np.ndarray:
        """Per-row log-likelihood."""

    @abstractmethod
    def grad_eta(
        self, y: np.ndarray, trials: np.ndarray, eta: np.ndarray, log_phi: float = 0.0
    ) -> np.ndarray:
        """Derivative of each row's log-likelihood with respect to its linear predictor."""

    def grad_log_phi(
        self, y: np.ndarray, trials: np.ndarray, eta: np.ndarray, log_phi: float = 0.0
    ) -> float:
        """Derivative of the summed log-likelihood with respect to log_phi."""
        return 0.0

    @abstractmethod
    def mean(self, eta: np.ndarray, log_phi: float | np.ndarray = 0.0) -> np.ndarray:
        """Success probability per trial."""

    @abstractmethod
    def draw(
        self,
        rng: np.random.Generator,
        trials: np.ndarray,
        eta: np.ndarray,
        log_phi: float | np.ndarray = 0.0,
    ) -> np.ndarray:
        """Simulate success counts."""


def log_choose(n: np.ndarray, k: np.ndarray) -> np.ndarray:
    """ln C(n, k) for integer arrays with 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return np.asarray(log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0))


def as_columns(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Lift a length-N vector to broadcast against an (N, S) draw matrix."""
    values = np.asarray(values, dtype=float)
    return values[:, None] if np.ndim(like) == 2 else values


# --- Family Registry ---

# Map of family name -> family class.
# Populated by register_family() when the family modules are imported.
FAMILY_REGISTRY: dict[str, type[Family]] = {}


def register_family(name: str):
    """Decorator to register a family class."""

    def decorator(cls: type[Family]):
        cls.name = name
        FAMILY_REGISTRY[name] = cls
        return cls

    return decorator


def get_family(name: str) -> Family:
    """
    Factory: create a family by registered name.

    Raises:
        ConfigError: If the name is not registered.
    """
    cls = FAMILY_REGISTRY.get(name)
    if cls is None:
        available = ", ".join(sorted(FAMILY_REGISTRY)) or "(none)"
        raise ConfigError(f"Unknown family: '{name}'. Available: {available}")
    return cls()
