"""Failure-time analysis for multi-hit shock models.

A system fails at the k-th shock whose gap from the previous shock falls
at or below a random recovery threshold.  The package provides the
analytic failure-time distribution (Laplace transform plus numerical
inversion), closed forms for the exponential and uniform gap cases, the
large-k normal approximation, and a seeded Monte Carlo simulator that
cross-validates every analytic result.
"""

from .closedform import (
    ExpConstParams,
    UnifConstParams,
    VarianceComparison,
    exp_const_cdf,
    exp_const_moments,
    exp_const_pdf,
    unif_const_mean,
    unif_const_variance_comparison,
    unif_const_variance_general,
    unif_const_variance_published,
)
from .distributions import (
    ArrivalLaw,
    Constant,
    Exponential,
    ProbabilityLaw,
    QuadratureError,
    ThresholdLaw,
    Uniform,
    weighted_laplace,
)
from .gaussian import ApproxErrorReport, NormalApprox, approx_error
from .laplace import (
    InversionConfig,
    InversionError,
    TransformEvaluator,
    invert_cdf,
    invert_density,
    invert_transform,
    laplace_h,
    moments_from_transform,
)
from .model import MomentSummary, ShockModel, UnrealizableModelError
from .simulate import (
    CHUNK_SIZE,
    KS_CRITICAL_001,
    FailureSample,
    SimulationConfig,
    SimulationReport,
    ks_statistic,
    run_batch,
    simulate_one,
    simulate_segments,
)

__version__ = "0.1.0"
