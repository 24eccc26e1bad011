"""
Beta-binomial counts in the mean-precision parameterization.

Each row has success probability mu = sigmoid(eta) and precision phi = exp(log_phi), giving
shape parameters alpha = mu * phi and beta = (1 - mu) * phi. Small phi means strong
overdispersion; as phi grows the family approaches the binomial.

A row with a single trial is a Bernoulli draw with probability mu whatever phi is, so
those rows are evaluated in closed form and contribute nothing to the phi gradient.
"""

from __future__ import annotations

import numpy as np

from src.families.base import Family, as_columns, log_choose, register_family
from src.stats.mathkernels import digamma, log_beta, log_sigmoid, sigmoid

_TINY = np.finfo(float).tiny


def _shapes(eta: np.ndarray, phi: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    alpha = np.maximum(phi * sigmoid(eta), _TINY)
    beta = np.maximum(phi * sigmoid(-np.asarray(eta)), _TINY)
    return alpha, beta


def _usable(phi: np.ndarray) -> np.ndarray:
    return np.isfinite(phi) & (phi > 0)


@register_family("beta_binomial_logit")
class BetaBinomialLogit(Family):
    has_dispersion = True

    def pointwise(self, y, trials, eta, log_phi=0.0):
        eta = np.asarray(eta, dtype=float)
        with np.errstate(over="ignore"):
            phi = np.broadcast_to(np.exp(np.asarray(log_phi, dtype=float)), eta.shape)
        ys = as_columns(y, eta)
        ns = as_columns(trials, eta)
        single = np.broadcast_to(ns == 1, eta.shape)
        usable = _usable(phi)
        alpha, beta = _shapes(eta, np.where(usable, phi, 1.0))
        with np.errstate(invalid="ignore", over="ignore"):
            out = (
                as_columns(log_choose(trials, y), eta)
                + log_beta(ys + alpha, ns - ys + beta)
                - log_beta(alpha, beta)
            )
        bernoulli = ys * log_sigmoid(eta) + (1 - ys) * log_sigmoid(-eta)
        out = np.where(usable, out, -np.inf)
        out = np.where(single, bernoulli, out)
        return np.where(np.isnan(out), -np.inf, out)

    def grad_eta(self, y, trials, eta, log_phi=0.0):
        eta = np.asarray(eta, dtype=float)
        with np.errstate(over="ignore"):
            phi = float(np.exp(log_phi))
        usable = bool(_usable(np.float64(phi)))
        ys = as_columns(y, eta)
        ns = as_columns(trials, eta)
        alpha, beta = _shapes(eta, phi if usable else 1.0)
        mu = sigmoid(eta)
        with np.errstate(over="ignore", invalid="ignore"):
            spread = (
                digamma(ys + alpha) - digamma(alpha) - digamma(ns - ys + beta) + digamma(beta)
            )
            grad = phi * mu * (1.0 - mu) * spread if usable else np.full(eta.shape, np.nan)
        return np.where(ns == 1, ys - mu, grad)

    def grad_log_phi(self, y, trials, eta, log_phi=0.0):
        eta = np.asarray(eta, dtype=float)
        ys = as_columns(y, eta)
        ns = as_columns(trials, eta)
        multi = np.broadcast_to(ns > 1, eta.shape)
        if not np.any(multi):
            return 0.0
        with np.errstate(over="ignore"):
            phi = float(np.exp(log_phi))
        if not _usable(np.float64(phi)):
            return float("nan")
        ys = np.broadcast_to(ys, eta.shape)[multi]
        ns = np.broadcast_to(ns, eta.shape)[multi]
        eta = eta[multi]
        alpha, beta = _shapes(eta, phi)
        with np.errstate(over="ignore", invalid="ignore"):
            per_row = (
                alpha * (digamma(ys + alpha) - digamma(alpha))
                + beta * (digamma(ns - ys + beta) - digamma(beta))
                + phi * (digamma(phi) - digamma(ns + phi))
            )
        return float(np.sum(per_row))

    def mean(self, eta, log_phi=0.0):
        return np.asarray(sigmoid(eta))

    def draw(self, rng, trials, eta, log_phi=0.0):
        eta = np.asarray(eta, dtype=float)
        ns = as_columns(trials, eta).astype(np.int64)
        if np.all(ns == 1):
            return rng.binomial(ns, sigmoid(eta))
        alpha, beta = _shapes(eta, np.exp(log_phi))
        p = rng.beta(alpha, beta)
        return rng.binomial(ns, p)
