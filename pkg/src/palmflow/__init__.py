"""Suspension semi-flows, their entry/return point processes and Palm identities."""

__version__ = "0.1.0"

from .point_measure import PointEnsemble, PointMeasure, WindowError, count, restrict_positive, shift, simplify, tau
from .stats import EmpiricalDistribution, Estimate

__all__ = [
    "EmpiricalDistribution",
    "Estimate",
    "PointEnsemble",
    "PointMeasure",
    "WindowError",
    "count",
    "restrict_positive",
    "shift",
    "simplify",
    "tau",
    "__version__",
]
