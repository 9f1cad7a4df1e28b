"""Finite-sample bound formulas for sup-deviations of dependent Gaussian empirical processes."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson

from .empirical import KernelSpec
from .errors import InvalidParameter

log = logging.getLogger(__name__)

LEMMA1_CONSTANT = math.sqrt(6.0) + math.sqrt(3.0)
THEOREM2_CONSTANT = 16.0
SMALL_RATIO_THRESHOLD = 1.0 / 18.0
# kernel width used when the ε-selection rule does not apply
SATURATED_EPSILON = 0.5


def _ratio(n: int, delta: float) -> float:
    if int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer, got {n!r}")
    if delta < 0:
        raise InvalidParameter("delta must be nonnegative")
    return (n + delta) / float(n) ** 2


def window_variance(kernel: KernelSpec, t) -> np.ndarray:
    """Inner bracket of D(ℓ)², clipped at zero.

    The bracket is a variance, so anything negative is roundoff; values
    below -1e-10 are logged since they would point at a bug instead.
    """
    v = np.asarray(kernel.window_variance_prime(t), dtype=float)
    low = float(v.min()) if v.size else 0.0
    if low < -1e-10:
        log.warning("negative window variance %.3e clipped to 0", low)
    return np.maximum(v, 0.0)


def d_functional(kernel: KernelSpec, points: int = 2048, domain: str = "compact") -> float:
    """D(ℓ) by composite Simpson over t with closed-form inner integrals.

    ``domain="compact"`` integrates over [-ε, 1+ε], outside of which the
    bracket vanishes; ``"full"`` uses [-1, 2] with proportionally more points.
    """
    e = kernel.epsilon
    if domain == "compact":
        lo, hi, m = -e, 1.0 + e, points
    elif domain == "full":
        lo, hi = -1.0, 2.0
        m = int(math.ceil(points * 3.0 / (1.0 + 2.0 * e)))
    else:
        raise InvalidParameter(f"unknown domain {domain!r}")
    m += m % 2
    t = np.linspace(lo, hi, m + 1)
    return math.sqrt(max(float(simpson(window_variance(kernel, t), x=t)), 0.0))


def d_functional_upper(epsilon: float) -> float:
    """√(2/ε), the easy upper bound on D(ℓ)."""
    return math.sqrt(2.0 / epsilon)


def lemma1_bound(n: int, delta: float, d_ell: float) -> float:
    return LEMMA1_CONSTANT * d_ell * math.sqrt(_ratio(n, delta))


def theorem2_bound(n: int, delta: float) -> float:
    return THEOREM2_CONSTANT * _ratio(n, delta) ** (1.0 / 3.0)


def combined_bound(n: int, delta: float, epsilon: float) -> float:
    """12·√((n+Δ)/(ε n²)) + 4ε, the pre-optimization bound for F̂."""
    return 12.0 * math.sqrt(_ratio(n, delta) / epsilon) + 4.0 * epsilon


def epsilon_star(n: int, delta: float) -> tuple[float | None, str]:
    r = _ratio(n, delta)
    if r <= SMALL_RATIO_THRESHOLD:
        return (9.0 * r / 4.0) ** (1.0 / 3.0), "small_ratio"
    return None, "saturated"


@dataclass(frozen=True)
class BoundReport:
    n: int
    delta: float
    epsilon: float
    epsilon_star: float | None
    regime: str
    d_ell: float
    d_ell_bound: float
    lemma1_value: float
    theorem2_value: float
    raw_combined: float

    def as_dict(self) -> dict:
        return asdict(self)


def bound_report(n: int, delta: float, epsilon: float | None = None, points: int = 2048) -> BoundReport:
    """Evaluate every bound at (n, Δ).

    ``epsilon`` fixes the kernel width for the Q̂ bound; by default ε⋆ is
    used, or 1/2 in the saturated regime where ε⋆ is undefined.
    """
    eps_star, regime = epsilon_star(n, delta)
    if epsilon is None:
        epsilon = eps_star if eps_star is not None else SATURATED_EPSILON
    kernel = KernelSpec(epsilon)
    d = d_functional(kernel, points)
    return BoundReport(
        n=int(n),
        delta=float(delta),
        epsilon=kernel.epsilon,
        epsilon_star=eps_star,
        regime=regime,
        d_ell=d,
        d_ell_bound=d_functional_upper(kernel.epsilon),
        lemma1_value=lemma1_bound(n, delta, d),
        theorem2_value=theorem2_bound(n, delta),
        raw_combined=combined_bound(n, delta, kernel.epsilon),
    )
