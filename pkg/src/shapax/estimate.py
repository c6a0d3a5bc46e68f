"""
Monte Carlo estimates
=====================

Streaming mean and variance of Monte Carlo samples using Welford's
update, with Chan's pairwise formula to merge estimates accumulated by
independent workers.

Example
-------
>>> est = None
>>> for sample in [0.0, 2.0]:
...     est = estimate_update(est, sample)
>>> est.mean, est.m2, est.count
(1.0, 2.0, 2)
>>> est.merge(Estimate.of(4.0)).mean
2.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .constants import Z_95
from .errors import ContractError, DataError
from .typing import ArrayLike


@dataclass(frozen=True)
class Estimate:
    """
    Point estimate of an expectation from ``count`` samples.
    """

    mean: float
    """Arithmetic average of the samples"""

    count: int
    """Number of samples"""

    m2: float = 0.0
    """Sum of squared deviations from the mean"""

    def __post_init__(self):
        if self.count < 1:
            raise ContractError("an estimate needs at least one sample")
        if self.m2 < 0:
            raise ContractError(f"sum of squared deviations must be nonnegative, got {self.m2}")

    @classmethod
    def of(cls, sample: float) -> "Estimate":
        """Estimate from a single sample."""
        return cls(_finite(sample), 1, 0.0)

    @classmethod
    def from_samples(cls, samples: ArrayLike) -> "Estimate":
        """
        Estimate from a batch of samples in two passes.

        Example
        -------
        >>> est = Estimate.from_samples([1.0, 1.0, 1.0])
        >>> est.mean, est.stderr
        (1.0, 0.0)
        """
        samples = np.asarray(samples, dtype=np.float64).ravel()
        if samples.size == 0:
            raise DataError("no samples to estimate from")
        if not np.all(np.isfinite(samples)):
            index = int(np.argmin(np.isfinite(samples)))
            raise DataError(f"non-finite sample at index {index}")
        mean = float(np.mean(samples))
        m2 = float(np.sum((samples - mean) ** 2))
        return cls(mean, int(samples.size), m2)

    @property
    def variance(self) -> float:
        """Unbiased sample variance, zero for a single sample."""
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        """Standard error of the mean, ``sqrt(m2 / (count (count - 1)))``."""
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count * (self.count - 1)))

    @property
    def ci95(self) -> Tuple[float, float]:
        """Normal approximation 95 % confidence interval of the mean."""
        half = Z_95 * self.stderr
        return (self.mean - half, self.mean + half)

    def update(self, sample: float) -> "Estimate":
        """Estimate after observing one more sample."""
        sample = _finite(sample)
        count = self.count + 1
        delta = sample - self.mean
        mean = self.mean + delta / count
        m2 = self.m2 + delta * (sample - mean)
        return Estimate(mean, count, max(m2, 0.0))

    def merge(self, other: "Estimate") -> "Estimate":
        """Estimate over the pooled samples of two estimates."""
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return Estimate(mean, count, m2)

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {
            "mean": self.mean,
            "count": self.count,
            "stderr": self.stderr,
            "ci95": [lo, hi],
        }


def estimate_update(e: Optional[Estimate], sample: float) -> Estimate:
    """
    Add a sample to a running estimate.

    Parameters
    ----------
    e : Estimate or None
        Running estimate, ``None`` before the first sample.
    sample : float
        Finite sample value.

    Returns
    -------
    Estimate
        Updated estimate, ``e`` itself is left unchanged.

    Raises
    ------
    DataError
        If the sample is not finite.
    """
    if e is None:
        return Estimate.of(sample)
    return e.update(sample)


def _finite(sample: float) -> float:
    sample = float(sample)
    if not math.isfinite(sample):
        raise DataError(f"non-finite sample {sample!r}")
    return sample
