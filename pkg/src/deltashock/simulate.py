"""Seeded Monte Carlo engine for the shock process.

Work is split into fixed-size chunks of 2^16 runs; chunk i draws from its
own generator keyed by (seed, i), and chunk summaries are merged in index
order, so results are bit-identical regardless of worker count.  Moments
stream through a single-pass accumulator (merged with the parallel
central-moment formulas up to fourth order, which the variance standard
error needs); failure times are retained up to a reservoir cap for the
empirical cdf, with a fixed-bin histogram covering arbitrarily large runs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ShockModel, UnrealizableModelError

__all__ = [
    "CHUNK_SIZE",
    "KS_CRITICAL_001",
    "SimulationConfig",
    "SimulationReport",
    "FailureSample",
    "simulate_one",
    "run_batch",
    "simulate_segments",
    "ks_statistic",
]

CHUNK_SIZE = 1 << 16
# Asymptotic one-sample Kolmogorov-Smirnov critical constant at alpha = 0.01.
KS_CRITICAL_001 = 1.63


@dataclass(frozen=True)
class SimulationConfig:
    """Batch size, stream seed, worker count and report shaping."""

    runs: int
    seed: int
    workers: int = 1
    histogram_bins: int = 200
    histogram_upper: float | None = None
    sample_reservoir: int = 1_000_000
    gap_reservoir: int = 0
    max_gaps_per_run: int = 10**9

    def __post_init__(self):
        if not (isinstance(self.runs, int) and self.runs >= 1):
            raise ValueError(f"runs must be an integer >= 1, got {self.runs!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ValueError(f"workers must be an integer >= 1, got {self.workers!r}")
        if self.histogram_bins < 1:
            raise ValueError("histogram_bins must be >= 1")


@dataclass(frozen=True)
class FailureSample:
    """One simulated run: failure time, total gap count, lethal gap indices."""

    time: float
    shock_count: int
    lethal_positions: tuple[int, ...]


@dataclass
class _Moments:
    """Count, mean and central sums up to fourth order, mergeable in order."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_array(cls, x: np.ndarray) -> "_Moments":
        n = len(x)
        mean = float(x.mean())
        d = x - mean
        return cls(n, mean, float((d**2).sum()), float((d**3).sum()), float((d**4).sum()))

    def merge(self, other: "_Moments") -> "_Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + other.m2 + delta**2 * na * nb / n
        m3 = (
            self.m3
            + other.m3
            + delta**3 * na * nb * (na - nb) / n**2
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n
        )
        m4 = (
            self.m4
            + other.m4
            + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
            + 6.0 * delta**2 * (na * na * other.m2 + nb * nb * self.m2) / n**2
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n
        )
        return _Moments(n, mean, m2, m3, m4)

    @property
    def variance(self) -> float | None:
        if self.n < 2:
            return None
        return self.m2 / (self.n - 1)


@dataclass(frozen=True)
class SimulationReport:
    """Summary of one batch: empirical moments, counts, cdf material."""

    runs: int
    seed: int
    mean: float
    variance: float | None
    se_mean: float | None
    se_variance: float | None
    mean_shock_count: float
    shock_count_histogram: np.ndarray
    sorted_times: np.ndarray
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    histogram_overflow: int
    min_time: float
    max_time: float
    lethal_gaps: np.ndarray | None = None
    nonlethal_gaps: np.ndarray | None = None

    def shock_count_probability(self, n: int) -> float:
        """Empirical P(N = n)."""
        if 0 <= n < len(self.shock_count_histogram):
            return self.shock_count_histogram[n] / self.runs
        return 0.0

    def empirical_cdf(self, t):
        """Right-continuous empirical cdf from the retained samples."""
        return np.searchsorted(self.sorted_times, np.asarray(t), side="right") / len(
            self.sorted_times
        )


def simulate_one(model: ShockModel, rng: np.random.Generator,
                 max_gaps: int = 10**9) -> FailureSample:
    """Single-run reference: draw gaps until the k-th lethal one."""
    total = 0.0
    gaps = 0
    lethal = 0
    positions = []
    while lethal < model.k:
        if gaps >= max_gaps:
            raise UnrealizableModelError(
                f"run exceeded {max_gaps} gaps without reaching {model.k} lethal shocks"
            )
        z = float(model.arrivals.sample(rng))
        delta = float(model.threshold.sample(rng))
        gaps += 1
        total += z
        if z <= delta:
            lethal += 1
            positions.append(gaps)
    return FailureSample(time=total, shock_count=gaps, lethal_positions=tuple(positions))


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,)))


def _simulate_chunk(model, n_runs, seed, chunk_index, histogram_edges, gap_cap, max_gaps):
    """Vectorized waves over the still-active runs of one chunk.

    Every active run has received exactly `wave` gaps, so the gap count of
    a run equals the wave index at which it finishes.
    """
    rng = _chunk_rng(seed, chunk_index)
    k = model.k
    times = np.zeros(n_runs)
    gap_counts = np.zeros(n_runs, dtype=np.int64)
    lethal_counts = np.zeros(n_runs, dtype=np.int64)
    active = np.arange(n_runs)
    lethal_kept: list[np.ndarray] = []
    nonlethal_kept: list[np.ndarray] = []
    kept = [0, 0]

    wave = 0
    while active.size:
        wave += 1
        if wave > max_gaps:
            raise UnrealizableModelError(
                f"{active.size} runs still unfinished after {max_gaps} gaps each"
            )
        z = np.asarray(model.arrivals.sample(rng, size=active.size), dtype=float)
        delta = np.asarray(model.threshold.sample(rng, size=active.size), dtype=float)
        lethal = z <= delta
        times[active] += z
        lethal_counts[active] += lethal
        gap_counts[active] = wave
        if gap_cap:
            if kept[0] < gap_cap:
                lethal_kept.append(z[lethal][: gap_cap - kept[0]])
                kept[0] += len(lethal_kept[-1])
            if kept[1] < gap_cap:
                nonlethal_kept.append(z[~lethal][: gap_cap - kept[1]])
                kept[1] += len(nonlethal_kept[-1])
        active = active[lethal_counts[active] < k]

    counts, _ = np.histogram(times, bins=histogram_edges)
    overflow = int((times > histogram_edges[-1]).sum())
    return {
        "moments": _Moments.from_array(times),
        "times": times,
        "shock_counts": np.bincount(gap_counts),
        "shock_count_sum": int(gap_counts.sum()),
        "hist_counts": counts,
        "hist_overflow": overflow,
        "min": float(times.min()),
        "max": float(times.max()),
        "lethal_gaps": np.concatenate(lethal_kept) if lethal_kept else np.empty(0),
        "nonlethal_gaps": np.concatenate(nonlethal_kept) if nonlethal_kept else np.empty(0),
    }


def _merge_bincounts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) < len(b):
        a, b = b, a
    out = a.copy()
    out[: len(b)] += b
    return out


def run_batch(model: ShockModel, config: SimulationConfig) -> SimulationReport:
    """Simulate config.runs failure times; deterministic given (seed, runs)."""
    upper = config.histogram_upper
    if upper is None:
        moments = model.failure_moments()
        upper = moments.mean + 10.0 * math.sqrt(moments.variance)
    edges = np.linspace(0.0, upper, config.histogram_bins + 1)

    n_chunks = (config.runs + CHUNK_SIZE - 1) // CHUNK_SIZE
    sizes = [
        min(CHUNK_SIZE, config.runs - i * CHUNK_SIZE) for i in range(n_chunks)
    ]
    args = [
        (model, sizes[i], config.seed, i, edges, config.gap_reservoir, config.max_gaps_per_run)
        for i in range(n_chunks)
    ]

    if config.workers == 1 or n_chunks == 1:
        results = [_simulate_chunk(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_simulate_chunk_star, args))

    moments = _Moments()
    shock_counts = np.zeros(1, dtype=np.int64)
    shock_sum = 0
    hist_counts = np.zeros(config.histogram_bins, dtype=np.int64)
    hist_overflow = 0
    times_parts: list[np.ndarray] = []
    times_kept = 0
    lethal_parts: list[np.ndarray] = []
    nonlethal_parts: list[np.ndarray] = []
    t_min, t_max = math.inf, -math.inf
    for r in results:
        moments = moments.merge(r["moments"])
        shock_counts = _merge_bincounts(shock_counts, r["shock_counts"])
        shock_sum += r["shock_count_sum"]
        hist_counts += r["hist_counts"]
        hist_overflow += r["hist_overflow"]
        t_min = min(t_min, r["min"])
        t_max = max(t_max, r["max"])
        if times_kept < config.sample_reservoir:
            part = r["times"][: config.sample_reservoir - times_kept]
            times_parts.append(part)
            times_kept += len(part)
        if config.gap_reservoir:
            lethal_parts.append(r["lethal_gaps"])
            nonlethal_parts.append(r["nonlethal_gaps"])

    variance = moments.variance
    se_mean = None if variance is None else math.sqrt(variance / moments.n)
    se_variance = None
    if variance is not None and moments.n >= 4:
        n = moments.n
        m4 = moments.m4 / n
        se_variance = math.sqrt(max(m4 - (n - 3) / (n - 1) * variance**2, 0.0) / n)

    lethal = nonlethal = None
    if config.gap_reservoir:
        lethal = np.concatenate(lethal_parts)[: config.gap_reservoir]
        nonlethal = np.concatenate(nonlethal_parts)[: config.gap_reservoir]

    return SimulationReport(
        runs=config.runs,
        seed=config.seed,
        mean=moments.mean,
        variance=variance,
        se_mean=se_mean,
        se_variance=se_variance,
        mean_shock_count=shock_sum / config.runs,
        shock_count_histogram=shock_counts,
        sorted_times=np.sort(np.concatenate(times_parts)),
        histogram_edges=edges,
        histogram_counts=hist_counts,
        histogram_overflow=hist_overflow,
        min_time=t_min,
        max_time=t_max,
        lethal_gaps=lethal,
        nonlethal_gaps=nonlethal,
    )


def _simulate_chunk_star(args):
    return _simulate_chunk(*args)


def simulate_segments(model: ShockModel, runs: int, seed: int,
                      max_gaps: int = 10**9) -> np.ndarray:
    """The k inter-lethal segment lengths of each run, shape (runs, k).

    Segment i is the elapsed time from the (i-1)-th lethal shock (or the
    start) to the i-th; the row sum is the failure time.  Used to check the
    segment decomposition empirically (i.i.d. segments with the per-segment
    moments).
    """
    rng = _chunk_rng(seed, 0)
    k = model.k
    segments = np.zeros((runs, k))
    acc = np.zeros(runs)
    lethal_counts = np.zeros(runs, dtype=np.int64)
    active = np.arange(runs)
    wave = 0
    while active.size:
        wave += 1
        if wave > max_gaps:
            raise UnrealizableModelError(
                f"{active.size} runs still unfinished after {max_gaps} gaps each"
            )
        z = np.asarray(model.arrivals.sample(rng, size=active.size), dtype=float)
        delta = np.asarray(model.threshold.sample(rng, size=active.size), dtype=float)
        acc[active] += z
        newly = active[z <= delta]
        segments[newly, lethal_counts[newly]] = acc[newly]
        acc[newly] = 0.0
        lethal_counts[newly] += 1
        active = active[lethal_counts[active] < k]
    return segments


def ks_statistic(report, analytic_cdf) -> float:
    """sup |empirical cdf - analytic cdf| over the retained sorted samples.

    Valid for continuous analytic cdfs.  `report` may be a SimulationReport
    or a plain sample array; `analytic_cdf` must accept a numpy array.
    """
    samples = report.sorted_times if isinstance(report, SimulationReport) else np.sort(
        np.asarray(report, dtype=float)
    )
    n = len(samples)
    if n == 0:
        raise ValueError("cannot compute a KS statistic from an empty sample")
    cdf_vals = np.asarray(analytic_cdf(samples), dtype=float)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(np.max(np.maximum(grid_hi - cdf_vals, cdf_vals - grid_lo)))
