"""Binomial counts with a logit link: the beta-binomial model without overdispersion."""

from __future__ import annotations

import numpy as np

from src.families.base import Family, as_columns, log_choose, register_family
from src.stats.mathkernels import log_sigmoid, sigmoid


@register_family("binomial_logit")
class BinomialLogit(Family):
    def pointwise(self, y, trials, eta, log_phi=0.0):
        eta = np.asarray(eta, dtype=float)
        ys = as_columns(y, eta)
        ns = as_columns(trials, eta)
        return as_columns(log_choose(trials, y), eta) + ys * log_sigmoid(eta) + (
            ns - ys
        ) * log_sigmoid(-eta)

    def grad_eta(self, y, trials, eta, log_phi=0.0):
        return as_columns(y, eta) - as_columns(trials, eta) * sigmoid(eta)

    def mean(self, eta, log_phi=0.0):
        return np.asarray(sigmoid(eta))

    def draw(self, rng, trials, eta, log_phi=0.0):
        return rng.binomial(as_columns(trials, eta).astype(np.int64), self.mean(eta))
