"""Small statistical helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """A Monte-Carlo estimate with its standard error."""

    value: float
    se: float = 0.0

    def __post_init__(self):
        if self.se < 0 or math.isnan(self.se):
            raise ValueError(f"standard error must be nonnegative, got {self.se}")

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se}


def fsum_mean(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan")
    return math.fsum(x) / x.size


def mean_se(x, weights=None) -> Estimate:
    """Sample mean and its standard error, optionally with importance weights.

    Weighted means use the self-normalized estimator; its standard error comes
    from the usual delta-method linearization.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("cannot average an empty sample")
    if weights is None:
        m = fsum_mean(x)
        if n < 2:
            return Estimate(m, 0.0)
        var = math.fsum((x - m) ** 2) / (n - 1)
        return Estimate(m, math.sqrt(var / n))
    w = np.asarray(weights, dtype=float)
    sw = math.fsum(w)
    m = math.fsum(w * x) / sw
    if n < 2:
        return Estimate(m, 0.0)
    resid = w * (x - m) / (sw / n)
    var = math.fsum(resid**2) / (n - 1)
    return Estimate(m, math.sqrt(var / n))


def ratio_se(num, den) -> Estimate:
    """Ratio of means ``mean(num) / mean(den)`` from paired samples."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    md = fsum_mean(den)
    if md == 0:
        raise ZeroDivisionError("denominator mean is zero")
    r = fsum_mean(num) / md
    if n < 2:
        return Estimate(r, 0.0)
    lin = (num - r * den) / md
    var = math.fsum((lin - fsum_mean(lin)) ** 2) / (n - 1)
    return Estimate(r, math.sqrt(var / n))


def binomial_se(p: float, n: int) -> float:
    if n <= 0:
        return 0.0
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def dkw_epsilon(n: int, confidence: float = 0.999) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band for ``n`` samples."""
    if n <= 0:
        return float("inf")
    alpha = 1.0 - confidence
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def combined_se(*ses: float) -> float:
    return math.sqrt(math.fsum(s * s for s in ses))


class EmpiricalDistribution:
    """Sorted sample with step-function CDF and survival evaluation.

    ``weight`` is the number of samples; optional per-sample weights turn the
    step heights into normalized weights.
    """

    def __init__(self, samples, weights=None):
        x = np.asarray(samples, dtype=float).ravel()
        if np.isnan(x).any():
            raise ValueError("samples contain NaN")
        order = np.argsort(x, kind="stable")
        self.samples = x[order]
        self.weight = int(x.size)
        if weights is None:
            self._w = None
            self._cum = np.arange(1, x.size + 1, dtype=float) / max(x.size, 1)
        else:
            w = np.asarray(weights, dtype=float).ravel()[order]
            self._w = w / w.sum()
            self._cum = np.cumsum(self._w)
            self._cum[-1] = 1.0

    def __len__(self) -> int:
        return self.weight

    def cdf(self, x):
        """Right-continuous CDF; works on scalars and arrays."""
        idx = np.searchsorted(self.samples, x, side="right")
        cum = np.concatenate([[0.0], self._cum])
        out = cum[idx]
        return float(out) if np.ndim(out) == 0 else out

    def survival(self, x):
        return 1.0 - self.cdf(x) if np.ndim(x) == 0 else 1.0 - np.asarray(self.cdf(x))

    def mean(self) -> float:
        if self._w is None:
            return fsum_mean(self.samples)
        return math.fsum(self._w * self.samples)

    def mean_estimate(self) -> Estimate:
        return mean_se(self.samples)

    def quantile(self, q: float) -> float:
        idx = int(np.searchsorted(self._cum, q, side="left"))
        return float(self.samples[min(idx, self.weight - 1)])

    def integral_survival(self, lo: float) -> float:
        """Exact ``int_lo^inf S(u) du`` of the step survival function.

        Equals the mean of ``max(X - lo, 0)``; mass is never cut off because the
        step function vanishes beyond the largest sample.
        """
        excess = np.maximum(self.samples - lo, 0.0)
        if self._w is None:
            return fsum_mean(excess)
        return math.fsum(self._w * excess)

    def sup_distance(self, other) -> float:
        """Kolmogorov distance to another empirical law or to a CDF callable."""
        if isinstance(other, EmpiricalDistribution):
            grid = np.concatenate([self.samples, other.samples])
            d1 = np.abs(np.asarray(self.cdf(grid)) - np.asarray(other.cdf(grid)))
            return float(d1.max()) if grid.size else 0.0
        # continuous reference: check both sides of every jump
        ref = np.asarray(other(self.samples), dtype=float)
        upper = self._cum
        lower = np.concatenate([[0.0], self._cum[:-1]])
        return float(max(np.abs(upper - ref).max(), np.abs(ref - lower).max()))


def ks_two_sample_threshold(n: int, m: int, confidence: float = 0.999) -> float:
    """Asymptotic critical value of the two-sample Kolmogorov distance."""
    alpha = 1.0 - confidence
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) * math.sqrt((n + m) / (n * m))
