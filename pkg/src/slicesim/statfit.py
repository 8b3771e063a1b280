"""Empirical PMFs of inter-acceptance times, geometric fits, and KL divergence.

Samples are discretized into bins of a fixed width; the geometric fit is the
maximum-likelihood estimate on support {0, 1, 2, ...}; divergence uses the
natural logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ContractViolation


@dataclass(frozen=True)
class EmpiricalPmf:
    """Binned sample distribution: counts per non-negative integer bin."""

    bin_width: float
    counts: tuple[tuple[int, int], ...]  # (bin, count), sorted by bin
    total: int

    def probability(self, bin_index: int) -> float:
        for k, c in self.counts:
            if k == bin_index:
                return c / self.total
        return 0.0

    @property
    def mean(self) -> float:
        """Mean bin index."""
        return sum(k * c for k, c in self.counts) / self.total


def empirical_pmf(samples: Sequence[float], bin_width: float) -> EmpiricalPmf:
    """Discretize non-negative samples into bins of the given width."""
    if bin_width <= 0.0:
        raise ContractViolation(f"bin width must be > 0, got {bin_width}")
    if len(samples) == 0:
        raise ContractViolation("cannot build an empirical PMF from no samples")
    counts: dict[int, int] = {}
    for t in samples:
        if t < 0.0:
            raise ContractViolation(f"samples must be non-negative, got {t}")
        k = int(t // bin_width)
        counts[k] = counts.get(k, 0) + 1
    ordered = tuple(sorted(counts.items()))
    return EmpiricalPmf(bin_width=bin_width, counts=ordered, total=len(samples))


def fit_geometric(pmf: EmpiricalPmf) -> float:
    """Maximum-likelihood geometric parameter on support {0, 1, 2, ...}."""
    return 1.0 / (1.0 + pmf.mean)


def kld_vs_geometric(pmf: EmpiricalPmf, p_hat: float) -> float:
    """Kullback-Leibler divergence of the empirical PMF from Geom(p_hat), in nats."""
    if not 0.0 < p_hat <= 1.0:
        raise ContractViolation(f"geometric parameter must lie in (0, 1], got {p_hat}")
    log_p = math.log(p_hat)
    log_q = math.log1p(-p_hat) if p_hat < 1.0 else float("-inf")
    total = 0.0
    for k, c in pmf.counts:
        if c == 0:
            continue
        p = c / pmf.total
        term = math.log(p) - log_p
        if k > 0:
            term -= k * log_q
        total += p * term
    return total


def fit_and_divergence(samples: Sequence[float], bin_width: float) -> tuple[float, float]:
    """Convenience: fit a geometric to binned samples and return (p_hat, divergence)."""
    pmf = empirical_pmf(samples, bin_width)
    p_hat = fit_geometric(pmf)
    return p_hat, kld_vs_geometric(pmf, p_hat)
