"""
Convergence Validator: checks a fitted run against the reporting thresholds.

Usage:
    validator = ConvergenceValidator()
    result = validator.validate(table, samples.divergent_count)
    if not result.ok:
        print(result.violations)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from src.stats.diagnostics import ESS_WARN, RHAT_WARN, SummaryTable

logger = logging.getLogger(__name__)


@dataclass
class ValidationResult:
    ok: bool
    violations: list[str] = field(default_factory=list)


class ConvergenceValidator:
    """
    Validates a fit against:
    1. Rhat limit (every parameter)
    2. Bulk and tail ESS floors
    3. Divergent transition budget
    """

    def __init__(
        self, max_rhat: float = RHAT_WARN, min_ess: float = ESS_WARN, max_divergent: int = 0
    ):
        self.max_rhat = max_rhat
        self.min_ess = min_ess
        self.max_divergent = max_divergent

    def validate(self, table: SummaryTable, divergent: int = 0) -> ValidationResult:
        """
        Validate a summary table plus the post-warmup divergence count.

        Args:
            table: Posterior summary of the fit.
            divergent: Number of divergent post-warmup transitions.

        Returns:
            ValidationResult with ok=True/False and list of violations.
        """
        violations: list[str] = []

        for row in table.rows:
            # NaN diagnostics (constant draws) cannot certify convergence.
            if not np.isfinite(row.rhat):
                violations.append(f"rhat: {row.name} undefined")
            elif row.rhat > self.max_rhat:
                violations.append(f"rhat: {row.name} {row.rhat:.3f} > {self.max_rhat}")

            for label, value in (("ess_bulk", row.ess_bulk), ("ess_tail", row.ess_tail)):
                if np.isfinite(value) and value < self.min_ess:
                    violations.append(f"{label}: {row.name} {value:.0f} < {self.min_ess:.0f}")

        if divergent > self.max_divergent:
            violations.append(f"divergent: {divergent} > {self.max_divergent}")

        for v in violations:
            logger.warning("Convergence check: %s", v)
        return ValidationResult(ok=len(violations) == 0, violations=violations)
