"""Multi-hit shock model: failure at the k-th gap shorter than its threshold.

A system started at t=0 receives shocks separated by i.i.d. gaps Z ~ F.
Each gap is compared against a fresh, independent threshold delta ~ G; the
gap is lethal iff Z <= delta (equality counts as lethal), and the system
fails at the k-th lethal gap.  The total gap count to failure is negative
binomial with success probability p = P(Z <= delta), and the failure time
decomposes into k i.i.d. segments, which gives the closed moment formulas
implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .distributions import (
    ArrivalLaw,
    Constant,
    Exponential,
    ThresholdLaw,
    _scalar_density,
    _scalar_weight,
    weighted_laplace,
)

__all__ = ["ShockModel", "MomentSummary", "UnrealizableModelError"]


class UnrealizableModelError(ValueError):
    """The model cannot fail (p = 0) or a simulation run cap was exceeded."""


@dataclass(frozen=True)
class MomentSummary:
    """Failure-time mean/variance with the per-segment pieces.

    mean = k * segment_mean and variance = k * segment_variance by the
    segment decomposition; both totals refer to the time to failure.
    """

    mean: float
    variance: float
    segment_mean: float
    segment_variance: float


@dataclass(frozen=True)
class ShockModel:
    """The triple (k, arrival law, threshold law)."""

    k: int
    arrivals: ArrivalLaw
    threshold: ThresholdLaw

    def __post_init__(self):
        if not (isinstance(self.k, int) and self.k >= 1):
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")
        # materializes the cached probability and rejects p = 0 up front
        self.lethal_prob

    @cached_property
    def lethal_prob(self) -> float:
        """p = P(Z <= delta), the probability a gap is lethal."""
        p = weighted_laplace(self.arrivals, self.threshold, 0.0, "survival").real
        p = min(max(p, 0.0), 1.0)
        if p <= 0.0:
            raise UnrealizableModelError(
                "threshold lies below the arrival support: no gap can be lethal (p = 0)"
            )
        return p

    @property
    def survive_prob(self) -> float:
        """q = 1 - p, the probability a gap is non-lethal."""
        return 1.0 - self.lethal_prob

    def alpha_density(self, t):
        """Density of a gap conditional on being non-lethal (Z > delta)."""
        q = self.survive_prob
        if q <= 0.0:
            raise UnrealizableModelError(
                "every gap is lethal (q = 0): the non-lethal gap law is undefined"
            )
        return self.arrivals.density(t) * np.asarray(self.threshold.cdf(t)) / q

    def beta_density(self, t):
        """Density of a gap conditional on being lethal (Z <= delta)."""
        return (
            self.arrivals.density(t)
            * np.asarray(self.threshold.survival(t))
            / self.lethal_prob
        )

    def shock_count_pmf(self, n: int) -> float:
        """P(N = n): negative binomial, C(n-1, k-1) p^k q^(n-k) for n >= k."""
        k, p = self.k, self.lethal_prob
        q = 1.0 - p
        if n < k:
            return 0.0
        if q == 0.0:
            return 1.0 if n == k else 0.0
        log_pmf = (
            math.lgamma(n)
            - math.lgamma(k)
            - math.lgamma(n - k + 1)
            + k * math.log(p)
            + (n - k) * math.log(q)
        )
        return math.exp(log_pmf)

    def mean_nonlethal_gap(self) -> float:
        """E(Z | Z > delta), the mean of the non-lethal gap law."""
        q = self.survive_prob
        if q <= 0.0:
            raise UnrealizableModelError("E(Z | Z > delta) is undefined when q = 0")
        if isinstance(self.arrivals, Exponential) and isinstance(self.threshold, Constant):
            # memorylessness: the overshoot beyond tau is again exponential
            return self.threshold.tau + 1.0 / self.arrivals.rate
        f = _scalar_density(self.arrivals)
        w = _scalar_weight(self.threshold, "cdf")
        cutoff = self.arrivals.upper_cutoff()
        points = sorted(
            p for p in set(self.arrivals.breakpoints()) | set(self.threshold.breakpoints())
            if 0.0 < p < cutoff
        )
        val, _ = integrate.quad(
            lambda t: t * f(t) * w(t),
            0.0,
            cutoff,
            points=points or None,
            epsabs=1e-13,
            epsrel=1e-11,
            limit=300,
        )
        return val / q

    def failure_moments(self) -> MomentSummary:
        """Mean and variance of the failure time.

        Per segment (time between consecutive lethal shocks):
            mu      = E(Z) / p
            sigma^2 = E(Z^2)/p + (2 E(Z) E(Z|Z>delta) q - E(Z)^2) / p^2
        and the totals are k*mu and k*sigma^2.  At p = 1 the cross term
        vanishes and sigma^2 reduces to Var(Z).
        """
        p = self.lethal_prob
        q = 1.0 - p
        ez = self.arrivals.raw_moment(1)
        ez2 = self.arrivals.raw_moment(2)
        cross = 0.0 if q == 0.0 else 2.0 * ez * self.mean_nonlethal_gap() * q
        mu = ez / p
        sigma2 = ez2 / p + (cross - ez * ez) / (p * p)
        return MomentSummary(
            mean=self.k * mu,
            variance=self.k * sigma2,
            segment_mean=mu,
            segment_variance=sigma2,
        )
