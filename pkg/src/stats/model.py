"""
Model: priors, likelihoods and the joint log-posterior on the unconstrained scale.

Parameters are packed as [beta0, beta_1 .. beta_k] plus a trailing log_phi for families
with a precision parameter. Sums over rows go through np.sum (pairwise summation), so
results do not depend on accumulation order beyond rounding.

Usage:
    spec = ModelSpec.for_design(dm, "bernoulli_logit")
    target = Posterior(spec, dm)
    lp, grad = target.log_density_and_grad(theta)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import ShapeError
from src.core.schemas import PriorSpec, canonical_family
from src.data.ingest import DesignMatrix
from src.families import Family, get_family
from src.stats.mathkernels import log_gamma

if TYPE_CHECKING:
    from src.mcmc.sampler import SampleSet

logger = logging.getLogger(__name__)

LOG_PHI = "log_phi"
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
# Draws per block when building the N x S pointwise matrix.
_DRAW_CHUNK = 500


class ModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    priors: PriorSpec
    column_names: tuple[str, ...] = Field(min_length=1)

    @field_validator("family")
    @classmethod
    def _known_family(cls, v: str) -> str:
        name = canonical_family(v)
        get_family(name)
        return name

    @classmethod
    def for_design(
        cls, dm: DesignMatrix, family: str, priors: PriorSpec | None = None
    ) -> ModelSpec:
        name = canonical_family(family)
        if priors is None:
            if name in ("bernoulli_logit", "binomial_logit"):
                priors = PriorSpec.logistic()
            else:
                priors = PriorSpec.beta_binomial()
        return cls(family=name, priors=priors, column_names=dm.column_names)

    @property
    def likelihood(self) -> Family:
        return get_family(self.family)

    @property
    def has_dispersion(self) -> bool:
        return self.likelihood.has_dispersion

    @property
    def n_coef(self) -> int:
        return len(self.column_names)

    @property
    def dim(self) -> int:
        return self.n_coef + int(self.has_dispersion)

    @property
    def param_names(self) -> list[str]:
        names = list(self.column_names)
        if self.has_dispersion:
            names.append(LOG_PHI)
        return names

    def check_design(self, dm: DesignMatrix) -> None:
        if tuple(dm.column_names) != tuple(self.column_names):
            raise ShapeError(
                f"design has {dm.n_cols} columns {list(dm.column_names)}, "
                f"model expects {self.n_coef} {list(self.column_names)}"
            )


@dataclass(frozen=True)
class ParamVector:
    beta0: float
    beta: np.ndarray
    log_phi: float | None = None

    @classmethod
    def from_array(cls, theta: ArrayLike, n_coef: int, has_dispersion: bool) -> ParamVector:
        arr = np.asarray(theta, dtype=float).reshape(-1)
        expected = n_coef + int(has_dispersion)
        if arr.size != expected:
            raise ShapeError(f"parameter vector has length {arr.size}, expected {expected}")
        return cls(
            beta0=float(arr[0]),
            beta=arr[1:n_coef].copy(),
            log_phi=float(arr[n_coef]) if has_dispersion else None,
        )

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.beta0], self.beta])

    @property
    def phi(self) -> float | None:
        return None if self.log_phi is None else float(np.exp(self.log_phi))

    def to_array(self) -> np.ndarray:
        tail = [] if self.log_phi is None else [self.log_phi]
        return np.concatenate([self.coefficients, tail])


def _params(spec: ModelSpec, theta: ParamVector | ArrayLike) -> ParamVector:
    if isinstance(theta, ParamVector):
        theta = theta.to_array()
    return ParamVector.from_array(theta, spec.n_coef, spec.has_dispersion)


def _normal_logpdf(x: np.ndarray, mean: float, sd: float) -> np.ndarray:
    z = (x - mean) / sd
    return -_HALF_LOG_2PI - np.log(sd) - 0.5 * z * z


def log_prior(spec: ModelSpec, theta: ParamVector | ArrayLike) -> float:
    """Normal priors on the coefficients; gamma on phi plus the log-Jacobian of exp(log_phi)."""
    p = _params(spec, theta)
    pr = spec.priors
    total = float(_normal_logpdf(np.float64(p.beta0), pr.intercept_mean, pr.intercept_sd))
    total += float(np.sum(_normal_logpdf(p.beta, pr.slope_mean, pr.slope_sd)))
    if p.log_phi is not None:
        phi = np.exp(p.log_phi)
        if not np.isfinite(phi):
            return -np.inf
        shape, rate = pr.phi_shape, pr.phi_rate
        log_gamma_pdf = (
            shape * np.log(rate) - float(log_gamma(shape)) + (shape - 1.0) * p.log_phi - rate * phi
        )
        total += float(log_gamma_pdf) + p.log_phi
    return total


def _grad_log_prior(spec: ModelSpec, p: ParamVector) -> np.ndarray:
    pr = spec.priors
    grad = [-(p.beta0 - pr.intercept_mean) / pr.intercept_sd**2]
    grad.extend(-(p.beta - pr.slope_mean) / pr.slope_sd**2)
    if p.log_phi is not None:
        grad.append(pr.phi_shape - pr.phi_rate * np.exp(p.log_phi))
    return np.asarray(grad, dtype=float)


def _eta(dm: DesignMatrix, coefficients: np.ndarray) -> np.ndarray:
    if coefficients.shape[0] != dm.n_cols:
        raise ShapeError(f"{coefficients.shape[0]} coefficients for {dm.n_cols} design columns")
    return dm.x @ coefficients


def log_lik_bernoulli(dm: DesignMatrix, theta: ParamVector | ArrayLike) -> float:
    family = get_family("bernoulli_logit")
    family.validate(dm.y, dm.trials)
    if not isinstance(theta, ParamVector):
        theta = ParamVector.from_array(theta, dm.n_cols, False)
    return float(np.sum(family.pointwise(dm.y, dm.trials, _eta(dm, theta.coefficients))))


def log_lik_beta_binomial(dm: DesignMatrix, theta: ParamVector | ArrayLike) -> float:
    family = get_family("beta_binomial_logit")
    family.validate(dm.y, dm.trials)
    if not isinstance(theta, ParamVector):
        theta = ParamVector.from_array(theta, dm.n_cols, True)
    if theta.log_phi is None:
        raise ShapeError("beta-binomial likelihood needs log_phi")
    eta = _eta(dm, theta.coefficients)
    return float(np.sum(family.pointwise(dm.y, dm.trials, eta, theta.log_phi)))


def log_likelihood(spec: ModelSpec, dm: DesignMatrix, theta: ParamVector | ArrayLike) -> float:
    spec.check_design(dm)
    p = _params(spec, theta)
    family = spec.likelihood
    eta = _eta(dm, p.coefficients)
    return float(np.sum(family.pointwise(dm.y, dm.trials, eta, p.log_phi or 0.0)))


def log_posterior(spec: ModelSpec, dm: DesignMatrix, theta: ParamVector | ArrayLike) -> float:
    spec.likelihood.validate(dm.y, dm.trials)
    prior = log_prior(spec, theta)
    if not np.isfinite(prior):
        return -np.inf
    return prior + log_likelihood(spec, dm, theta)


def grad_log_posterior(
    spec: ModelSpec, dm: DesignMatrix, theta: ParamVector | ArrayLike
) -> np.ndarray:
    """Analytic gradient in parameter order [beta0, beta_1 .. beta_k, (log_phi)]."""
    spec.check_design(dm)
    p = _params(spec, theta)
    family = spec.likelihood
    log_phi = p.log_phi or 0.0
    eta = _eta(dm, p.coefficients)
    grad = _grad_log_prior(spec, p)
    grad[: spec.n_coef] += dm.x.T @ family.grad_eta(dm.y, dm.trials, eta, log_phi)
    if spec.has_dispersion:
        grad[-1] += family.grad_log_phi(dm.y, dm.trials, eta, log_phi)
    return grad


def pointwise_log_lik(
    spec: ModelSpec, dm: DesignMatrix, draws: SampleSet | ArrayLike
) -> np.ndarray:
    """
    N x S matrix of per-row log-likelihoods, one column per posterior draw.

    Draws may be a SampleSet, an (S, D) matrix or a (C, S, D) array; chains are
    concatenated in chain order.
    """
    spec.check_design(dm)
    arr = np.asarray(getattr(draws, "draws", draws), dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim == 3:
        arr = arr.reshape(-1, arr.shape[-1])
    if arr.ndim != 2 or arr.shape[1] != spec.dim:
        raise ShapeError(f"draws of shape {arr.shape} do not match model dimension {spec.dim}")

    family = spec.likelihood
    n_draws = arr.shape[0]
    out = np.empty((dm.n_rows, n_draws))
    for start in range(0, n_draws, _DRAW_CHUNK):
        block = arr[start : start + _DRAW_CHUNK]
        eta = dm.x @ block[:, : spec.n_coef].T
        log_phi = block[:, -1] if spec.has_dispersion else 0.0
        out[:, start : start + block.shape[0]] = family.pointwise(dm.y, dm.trials, eta, log_phi)
    return out


class Posterior:
    """
    Log-density target handed to the sampler.

    When every row is a single trial the beta-binomial likelihood does not involve phi:
    HMC then moves only the coefficients under the Bernoulli likelihood, and
    `draw_exact` supplies log_phi straight from its gamma prior. `dim` counts the
    coordinates HMC moves; `param_names` lists every parameter of the model.

    Holds no mutable state, so one instance can be shared by concurrent chains.
    """

    def __init__(self, spec: ModelSpec, dm: DesignMatrix):
        spec.check_design(dm)
        spec.likelihood.validate(dm.y, dm.trials)
        self.phi_from_prior = spec.has_dispersion and bool(np.all(dm.trials == 1))
        if self.phi_from_prior and dm.n_rows:
            logger.warning(
                "Fitting %s on data with one trial per row: the precision phi is not "
                "identified and is drawn from its prior",
                spec.family,
            )
        self.spec = spec
        self.dm = dm
        self._moved = (
            ModelSpec(
                family="bernoulli_logit", priors=spec.priors, column_names=spec.column_names
            )
            if self.phi_from_prior
            else spec
        )

    @property
    def dim(self) -> int:
        return self._moved.dim

    @property
    def param_names(self) -> list[str]:
        return self.spec.param_names

    def log_density(self, theta: np.ndarray) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            value = log_prior(self._moved, theta)
            if np.isfinite(value):
                value += log_likelihood(self._moved, self.dm, theta)
        return float(value) if np.isfinite(value) else -np.inf

    def log_density_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        value = self.log_density(theta)
        if not np.isfinite(value):
            return -np.inf, np.full(self.dim, np.nan)
        with np.errstate(over="ignore", invalid="ignore"):
            grad = grad_log_posterior(self._moved, self.dm, theta)
        return value, grad

    def draw_exact(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """
        (n, k) draws of the k parameters HMC does not move.

        log_phi = log G(a + 1) + log(U) / a - log(rate) is the log of a gamma(a, rate)
        variate and stays finite where the variate itself underflows (small shapes).
        """
        if not self.phi_from_prior:
            return np.empty((n, 0))
        shape, rate = self.spec.priors.phi_shape, self.spec.priors.phi_rate
        g = rng.gamma(shape + 1.0, 1.0, n)
        u = 1.0 - rng.random(n)
        return (np.log(g) + np.log(u) / shape - np.log(rate))[:, None]
