"""Estimate records and mergeable sufficient statistics for replicate batches."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EstimateWithCI:
    """A Monte Carlo estimate with its standard error and sample accounting."""

    value: float
    stderr: float
    n_effective: int
    conditioning_rate: float = 1.0


@dataclass
class RatioAccumulator:
    """Sums behind a mean over selected replicates.

    The estimator is the ratio of means mean(value * selected) / mean(selected),
    whose standard error comes from the delta method.  For indicator values over
    a random selection this reduces to the usual binomial formula, and for an
    unconditional mean (everything selected) it reduces to the plain standard
    error of the mean.  Accumulators merge by field-wise addition, so partial
    statistics from worker chunks can be folded in a canonical order.
    """

    n: int = 0
    n_selected: int = 0
    sum_y: float = 0.0
    sum_y2: float = 0.0

    def add(self, value: float, selected: bool = True) -> None:
        self.n += 1
        if selected:
            self.n_selected += 1
            self.sum_y += value
            self.sum_y2 += value * value

    def add_batch(self, values: np.ndarray, selected: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        selected = np.asarray(selected, dtype=bool)
        picked = values[selected]
        self.n += int(selected.size)
        self.n_selected += int(picked.size)
        self.sum_y += float(picked.sum())
        self.sum_y2 += float((picked * picked).sum())

    def merge(self, other: "RatioAccumulator") -> None:
        self.n += other.n
        self.n_selected += other.n_selected
        self.sum_y += other.sum_y
        self.sum_y2 += other.sum_y2

    def estimate(self) -> EstimateWithCI:
        if self.n_selected == 0:
            return EstimateWithCI(0.0, math.inf, 0, 0.0)
        n = self.n
        rate = self.n_selected / n
        ratio = self.sum_y / self.n_selected
        # Delta method on (mean of y, mean of selection indicator); y is zero
        # off-selection, so cov(y, s) = mean(y) * (1 - rate).
        mean_y = self.sum_y / n
        var_y = max(self.sum_y2 / n - mean_y * mean_y, 0.0)
        cov_ys = mean_y * (1.0 - rate)
        var_s = rate * (1.0 - rate)
        var_ratio = var_y - 2.0 * ratio * cov_ys + ratio * ratio * var_s
        stderr = math.sqrt(max(var_ratio, 0.0) / n) / rate
        return EstimateWithCI(ratio, stderr, self.n_selected, rate)
