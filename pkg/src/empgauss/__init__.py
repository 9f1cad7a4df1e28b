"""Empirical processes of dependent standardized Gaussian sequences.

Covariance families, reproducible sampling, Hermite expansions of the
smoothed indicator, exact and certified sup-deviations, finite-sample bound
formulas, and a Monte Carlo harness that checks them.
"""

from .bounds import BoundReport, bound_report, epsilon_star, lemma1_bound, theorem2_bound
from .covmodels import CovarianceModel, FamilySpec, build_explicit, build_family, dependence_measure
from .empirical import DeviationResult, KernelSpec, ecdf_sup_deviation, qhat_sup_deviation
from .sampler import factorize, sample_path, uniformize

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "CovarianceModel", "DeviationResult", "FamilySpec", "KernelSpec",
    "bound_report", "build_explicit", "build_family", "dependence_measure",
    "ecdf_sup_deviation", "epsilon_star", "factorize", "lemma1_bound",
    "qhat_sup_deviation", "sample_path", "theorem2_bound", "uniformize",
]
