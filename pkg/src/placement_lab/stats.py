"""Estimators and goodness-of-fit measures over simulation traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from placement_lab.meanfield import TailVector
from placement_lab.simulator import EventTrace


def default_warmup_days(mtbf_days: float) -> float:
    """Stationarity cut: discard the first max(100 days, 10 lifetimes)."""
    return max(100.0, 10.0 * mtbf_days)


@dataclass
class EmpiricalDistribution:
    """Integer load histogram with exact counts."""

    counts: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    def cdf_values(self) -> np.ndarray:
        """Cumulative fraction at x = 0..max observed load."""
        return np.cumsum(self.counts) / self.size

    def cdf(self, x: int) -> float:
        if x < 0:
            return 0.0
        if x >= len(self.counts) - 1:
            return 1.0
        return float(self.counts[: x + 1].sum() / self.size)

    def mean(self) -> float:
        return float(np.arange(len(self.counts)) @ self.counts / self.size)


@dataclass
class FitReport:
    """Goodness of fit between an empirical load distribution and a model law."""

    model: str
    ks_distance: float
    mean_gap: float
    samples: int


@dataclass
class MaxLoadStats:
    """Per-sample-time maximal loads pooled across runs."""

    mean_of_max: float
    minimum: int
    maximum: int
    samples: int


def empirical_cdf(loads, provenance: dict | None = None) -> EmpiricalDistribution:
    """Exact counts of an integer load sample."""
    loads = np.asarray(loads)
    if loads.size == 0:
        raise ValueError("empty load sample")
    counts = np.bincount(loads.reshape(-1).astype(np.int64))
    return EmpiricalDistribution(counts=counts, provenance=provenance or {})


def ks_distance(emp: EmpiricalDistribution, model: TailVector) -> float:
    """Sup over integer x of |empirical CDF(x) - (1 - tail(x+1))|.

    The model tail is padded with zeros past its truncation point, so the
    comparison covers the whole empirical support.
    """
    support = max(len(emp.counts), model.x_max + 1)
    emp_cdf = np.ones(support)
    emp_cdf[: len(emp.counts)] = emp.cdf_values()
    model_tail = np.zeros(support + 1)
    stop = min(len(model.tail), support + 1)
    model_tail[:stop] = model.tail[:stop]
    model_cdf = 1.0 - model_tail[1:]
    return float(np.abs(emp_cdf - model_cdf).max())


def fit_report(emp: EmpiricalDistribution, model: TailVector, model_id: str) -> FitReport:
    return FitReport(
        model=model_id,
        ks_distance=ks_distance(emp, model),
        mean_gap=abs(emp.mean() - model.mean()),
        samples=emp.size,
    )


def _post_warmup_snapshots(trace: EventTrace, warmup_days: float | None):
    if warmup_days is None:
        warmup_days = default_warmup_days(trace.config.mtbf_days)
    return [snap for snap in trace.snapshots if snap.time >= warmup_days]


def stationary_loads(trace: EventTrace, warmup_days: float | None = None) -> np.ndarray:
    """Pool per-node loads over all snapshots after the warmup cut."""
    snaps = _post_warmup_snapshots(trace, warmup_days)
    if not snaps:
        raise ValueError("no snapshots after warmup")
    return np.concatenate([snap.loads for snap in snaps])


def _age_load_sums(
    trace: EventTrace, edges: np.ndarray, warmup_days: float | None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-age-bin load sums and sample counts over post-warmup snapshots."""
    sums = np.zeros(len(edges) - 1)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    for snap in _post_warmup_snapshots(trace, warmup_days):
        bins = np.searchsorted(edges, snap.ages, side="right") - 1
        valid = (bins >= 0) & (bins < len(sums))
        np.add.at(sums, bins[valid], snap.loads[valid])
        np.add.at(counts, bins[valid], 1)
    return sums, counts


def age_bin_edges(age_bins, max_age: float) -> np.ndarray:
    """Resolve a bin-width number or an explicit edge array into edges."""
    if age_bins is None:
        age_bins = 1.0
    if np.isscalar(age_bins):
        width = float(age_bins)
        if width <= 0:
            raise ValueError("age bin width must be positive")
        # top edge strictly above max_age so bins are half-open everywhere
        n_bins = int(np.floor(max_age / width)) + 1
        return width * np.arange(n_bins + 1)
    edges = np.asarray(age_bins, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("age bin edges must be increasing with at least two entries")
    return edges


def load_vs_age(
    trace: EventTrace,
    age_bins=None,
    warmup_days: float | None = None,
) -> list[tuple[float, float, int]]:
    """Mean load per node-age bin as (bin center, mean load, samples).

    `age_bins` is a bin width in days (default 1.0) or an explicit array of
    bin edges. Empty bins are omitted.
    """
    if not trace.snapshots:
        raise ValueError("trace has no snapshots")
    max_age = max(float(snap.ages.max()) for snap in trace.snapshots)
    edges = age_bin_edges(age_bins, max_age)
    sums, counts = _age_load_sums(trace, edges, warmup_days)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return [
        (float(centers[i]), float(sums[i] / counts[i]), int(counts[i]))
        for i in range(len(counts))
        if counts[i] > 0
    ]


def max_load_stats(
    runs: Iterable[EventTrace],
    warmup_days: float | None = None,
    sample_period_days: float | None = None,
) -> MaxLoadStats:
    """Pool the per-snapshot maximal load across runs after warmup.

    Each retained snapshot contributes max over nodes of the load; the
    result reports mean, min and max of those per-sample maxima. When
    `sample_period_days` is set, snapshots closer together than the period
    are skipped.
    """
    total = 0.0
    count = 0
    lowest: int | None = None
    highest: int | None = None
    for trace in runs:
        cut = (
            warmup_days
            if warmup_days is not None
            else default_warmup_days(trace.config.mtbf_days)
        )
        next_keep = -np.inf
        for snap in trace.snapshots:
            if snap.time < cut or snap.time < next_keep:
                continue
            if sample_period_days is not None:
                # tiny slack so exact period multiples are kept despite rounding
                next_keep = snap.time + sample_period_days * (1.0 - 1e-9)
            peak = int(snap.loads.max())
            total += peak
            count += 1
            if lowest is None or peak < lowest:
                lowest = peak
            if highest is None or peak > highest:
                highest = peak
    if count == 0:
        raise ValueError("no samples after warmup")
    return MaxLoadStats(
        mean_of_max=total / count,
        minimum=lowest,
        maximum=highest,
        samples=count,
    )
