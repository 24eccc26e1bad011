"""Bernoulli outcomes (one trial per row) with a logit link."""

from __future__ import annotations

import numpy as np

from src.core.errors import FamilyMismatchError
from src.families.base import Family, as_columns, register_family
from src.stats.mathkernels import log_sigmoid, sigmoid


@register_family("bernoulli_logit")
class BernoulliLogit(Family):
    def validate(self, y: np.ndarray, trials: np.ndarray) -> None:
        bad = np.flatnonzero(trials != 1)
        if bad.size:
            raise FamilyMismatchError(
                f"bernoulli_logit needs trials == 1; row {bad[0] + 1} has {trials[bad[0]]} "
                "(use binomial_logit or beta_binomial_logit for aggregated rows)"
            )
        super().validate(y, trials)

    def pointwise(self, y, trials, eta, log_phi=0.0):
        y = as_columns(y, eta)
        return y * log_sigmoid(eta) + (1.0 - y) * log_sigmoid(-np.asarray(eta))

    def grad_eta(self, y, trials, eta, log_phi=0.0):
        return as_columns(y, eta) - sigmoid(eta)

    def mean(self, eta, log_phi=0.0):
        return np.asarray(sigmoid(eta))

    def draw(self, rng, trials, eta, log_phi=0.0):
        return rng.binomial(1, self.mean(eta))
