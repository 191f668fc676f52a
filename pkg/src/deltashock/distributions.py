"""Probability laws for shock inter-arrival gaps and recovery thresholds.

Two families are used by the shock model: the arrival law F of the gaps
between successive shocks (needs a density, moments and Laplace-type
integrals) and the threshold law G of the recovery time delta a gap is
compared against (needs only cdf/survival/sampling).  Both are immutable
value objects; sampling draws from a caller-owned numpy Generator.
"""

from __future__ import annotations

import cmath
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "ProbabilityLaw",
    "ThresholdLaw",
    "ArrivalLaw",
    "Exponential",
    "Uniform",
    "Constant",
    "QuadratureError",
    "weighted_laplace",
    "weighted_time_integral",
]

# Tail mass below which the semi-infinite quadrature range is truncated.
TAIL_EPS = 1e-12
_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-11, limit=300)


class QuadratureError(RuntimeError):
    """A weighted-transform integral did not converge to tolerance."""


class ProbabilityLaw(ABC):
    """Nonnegative law with a cdf, survival function and sampler."""

    @abstractmethod
    def cdf(self, t):
        """P(X <= t); 0 below the support."""

    def survival(self, t):
        """P(X > t) = 1 - cdf(t)."""
        return 1.0 - self.cdf(t)

    @abstractmethod
    def sample(self, rng: np.random.Generator, size=None):
        """Draw from the law using the given generator stream."""

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the cdf or density is not smooth."""
        return ()


# A threshold law needs nothing beyond the base surface; the constant
# threshold below is the degenerate member of this family.
ThresholdLaw = ProbabilityLaw


class ArrivalLaw(ProbabilityLaw):
    """Gap law: adds a density, raw moments and a quadrature cutoff.

    Subclass this to plug other nonnegative laws into the model.
    """

    @abstractmethod
    def density(self, t):
        """Density f(t); 0 outside the support. Rejects t < 0."""

    @abstractmethod
    def raw_moment(self, order: int) -> float:
        """E(X^order) for order 1 or 2, in closed form."""

    @abstractmethod
    def upper_cutoff(self, eps: float = TAIL_EPS) -> float:
        """t beyond which the survival mass is below eps."""

    @staticmethod
    def _check_nonnegative(t) -> None:
        if np.any(np.asarray(t) < 0):
            raise ValueError("density is only defined for t >= 0")

    @staticmethod
    def _check_order(order: int) -> None:
        if order not in (1, 2):
            raise ValueError(f"unsupported moment order {order}; expected 1 or 2")


@dataclass(frozen=True)
class Exponential(ArrivalLaw):
    """Exponential law with the given rate (units 1/time)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")

    def density(self, t):
        self._check_nonnegative(t)
        return self.rate * np.exp(-self.rate * np.asarray(t, dtype=float))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)[()]

    def sample(self, rng, size=None):
        return rng.exponential(scale=1.0 / self.rate, size=size)

    def raw_moment(self, order):
        self._check_order(order)
        return 1.0 / self.rate if order == 1 else 2.0 / self.rate**2

    def upper_cutoff(self, eps=TAIL_EPS):
        return -math.log(eps) / self.rate


@dataclass(frozen=True)
class Uniform(ArrivalLaw):
    """Uniform law on (lower, upper), lower >= 0 (units time)."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower >= 0:
            raise ValueError(f"lower must be >= 0, got {self.lower}")
        if not self.upper > self.lower:
            raise ValueError(f"upper must exceed lower, got ({self.lower}, {self.upper})")

    def density(self, t):
        self._check_nonnegative(t)
        t = np.asarray(t, dtype=float)
        inside = (t >= self.lower) & (t <= self.upper)
        return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)[()]

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        frac = (t - self.lower) / (self.upper - self.lower)
        return np.clip(frac, 0.0, 1.0)[()]

    def sample(self, rng, size=None):
        return rng.uniform(self.lower, self.upper, size=size)

    def raw_moment(self, order):
        self._check_order(order)
        a, b = self.lower, self.upper
        return (a + b) / 2.0 if order == 1 else (a * a + a * b + b * b) / 3.0

    def upper_cutoff(self, eps=TAIL_EPS):
        return self.upper

    def breakpoints(self):
        return (self.lower, self.upper)


@dataclass(frozen=True)
class Constant(ProbabilityLaw):
    """Degenerate threshold fixed at tau: G(t) = 0 for t < tau, 1 for t >= tau."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= self.tau, 1.0, 0.0)[()]

    def sample(self, rng, size=None):
        if size is None:
            return self.tau
        return np.full(size, self.tau)

    def breakpoints(self):
        return (self.tau,)


def _phi(x: complex) -> complex:
    """(1 - exp(-x)) / x, cancellation-free (value 1 at x = 0).

    Splitting 1 - exp(-a-ib) into -expm1(-a) + exp(-a)(1 - cos b) and
    exp(-a) sin b keeps full precision for small |x|, which the moment
    differentiation needs.
    """
    if x == 0:
        return 1.0 + 0.0j
    a, b = x.real, x.imag
    real_part = -math.expm1(-a) + math.exp(-a) * 2.0 * math.sin(b / 2.0) ** 2
    imag_part = math.exp(-a) * math.sin(b)
    return complex(real_part, imag_part) / x


def weighted_laplace(arrival: ArrivalLaw, threshold: ThresholdLaw, s: complex,
                     weight: str) -> complex:
    """Integral of exp(-s t) f(t) w(t) over t >= 0.

    w is the threshold survival function for weight="survival" (the lethal
    branch: its value at s=0 is the lethality probability) or the threshold
    cdf for weight="cdf" (the non-lethal branch).  Closed forms cover the
    exponential+constant and uniform+constant pairs; anything else falls
    back to adaptive quadrature truncated where the arrival tail mass drops
    below TAIL_EPS.  Values are guaranteed finite for Re s >= 0; small
    negative real parts are usable thanks to the finite cutoff (the moment
    differentiation relies on this).
    """
    if weight not in ("survival", "cdf"):
        raise ValueError(f"weight must be 'survival' or 'cdf', got {weight!r}")
    s = complex(s)

    if isinstance(threshold, Constant):
        if isinstance(arrival, Exponential):
            lam, tau = arrival.rate, threshold.tau
            w = s + lam
            if weight == "survival":
                # integral of lam*exp(-(s+lam)t) over [0, tau]
                return lam * tau * _phi(w * tau)
            # integral over [tau, inf); needs Re(s+lam) > 0
            return lam * cmath.exp(-w * tau) / w
        if isinstance(arrival, Uniform):
            a, b = arrival.lower, arrival.upper
            m = min(max(threshold.tau, a), b)
            if weight == "survival":
                lo, hi = a, m
            else:
                lo, hi = m, b
            width = hi - lo
            if width <= 0:
                return 0.0 + 0.0j
            return cmath.exp(-s * lo) * width * _phi(s * width) / (b - a)

    return _weighted_laplace_quad(arrival, threshold, s, weight)


def _scalar_density(arrival: ArrivalLaw):
    """Fast scalar density closure for quadrature integrands.

    The vectorized law methods cost microseconds per scalar call, which
    dominates adaptive quadrature; built-in laws get plain-math closures and
    anything else falls back to the generic method.
    """
    if isinstance(arrival, Exponential):
        rate = arrival.rate
        return lambda t: rate * math.exp(-rate * t) if t >= 0.0 else 0.0
    if isinstance(arrival, Uniform):
        lo, hi = arrival.lower, arrival.upper
        height = 1.0 / (hi - lo)
        return lambda t: height if lo <= t <= hi else 0.0
    return lambda t: float(arrival.density(t))


def _scalar_weight(threshold: ThresholdLaw, weight: str):
    """Fast scalar closure for the threshold cdf or survival function."""
    if isinstance(threshold, Constant):
        tau = threshold.tau
        if weight == "survival":
            return lambda t: 1.0 if t < tau else 0.0
        return lambda t: 1.0 if t >= tau else 0.0
    if isinstance(threshold, Exponential):
        rate = threshold.rate
        if weight == "survival":
            return lambda t: math.exp(-rate * t) if t > 0.0 else 1.0
        return lambda t: -math.expm1(-rate * t) if t > 0.0 else 0.0
    if isinstance(threshold, Uniform):
        lo, hi = threshold.lower, threshold.upper
        span = hi - lo

        def cdf(t):
            if t <= lo:
                return 0.0
            if t >= hi:
                return 1.0
            return (t - lo) / span

        if weight == "survival":
            return lambda t: 1.0 - cdf(t)
        return cdf
    w_fn = threshold.survival if weight == "survival" else threshold.cdf
    return lambda t: float(w_fn(t))


def weighted_time_integral(arrival: ArrivalLaw, threshold: ThresholdLaw, t: float,
                           weight: str) -> float:
    """Integral of f(u) w(u) over [0, t], w as in weighted_laplace.

    The survival-weighted value is p times the cdf of a lethal gap.  Closed
    forms cover the constant-threshold pairs; anything else is quadrature.
    """
    if weight not in ("survival", "cdf"):
        raise ValueError(f"weight must be 'survival' or 'cdf', got {weight!r}")
    if t <= 0.0:
        return 0.0

    if isinstance(threshold, Constant):
        tau = threshold.tau
        if isinstance(arrival, Exponential):
            lam = arrival.rate
            if weight == "survival":
                return -math.expm1(-lam * min(t, tau))
            return math.exp(-lam * tau) - math.exp(-lam * max(t, tau)) if t > tau else 0.0
        if isinstance(arrival, Uniform):
            a, b = arrival.lower, arrival.upper
            m = min(max(tau, a), b)
            if weight == "survival":
                lo, hi = a, m
            else:
                lo, hi = m, b
            return (min(max(t, lo), hi) - lo) / (b - a)

    f = _scalar_density(arrival)
    w = _scalar_weight(threshold, weight)
    upper = min(t, arrival.upper_cutoff())
    points = sorted(
        p for p in set(arrival.breakpoints()) | set(threshold.breakpoints())
        if 0.0 < p < upper
    )
    val, _ = integrate.quad(
        lambda u: f(u) * w(u), 0.0, upper, points=points or None, **_QUAD_OPTS
    )
    return val


def _weighted_laplace_quad(arrival, threshold, s, weight):
    """Adaptive quadrature fallback, split at law breakpoints.

    The oscillatory factor exp(-i Im(s) t) is handled by the cos/sin
    weighted rule, which stays cheap for the high frequencies the inversion
    contour needs.
    """
    f = _scalar_density(arrival)
    w = _scalar_weight(threshold, weight)
    cutoff = arrival.upper_cutoff()
    edges = [0.0] + sorted(
        p for p in set(arrival.breakpoints()) | set(threshold.breakpoints())
        if 0.0 < p < cutoff
    ) + [cutoff]
    sigma, omega = s.real, s.imag

    def envelope(t):
        return math.exp(-sigma * t) * f(t) * w(t)

    re = im = err = 0.0
    for lo, hi in zip(edges, edges[1:]):
        if omega == 0.0:
            val, e = integrate.quad(envelope, lo, hi, **_QUAD_OPTS)
            re += val
            err += e
        else:
            val, e = integrate.quad(envelope, lo, hi, weight="cos", wvar=omega, **_QUAD_OPTS)
            re += val
            err += e
            val, e = integrate.quad(envelope, lo, hi, weight="sin", wvar=omega, **_QUAD_OPTS)
            im -= val
            err += e
    if err > 1e-7 * max(1.0, abs(complex(re, im))):
        raise QuadratureError(
            f"weighted transform did not converge at s={s}: error estimate {err:.3g}"
        )
    return complex(re, im)
