"""Normalized Hermite polynomials and expansion coefficients of the smoothed indicator.

``h_k = He_k / √k!`` is orthonormal under the standard Gaussian measure μ.
The coefficients of interest are

    c_k(t)  = ∫ ℓ(t - Φ(x)) h_k(x) dμ(x),
    c_k'(t) = ∫ ℓ'(t - Φ(x)) h_k(x) dμ(x).

ℓ(t - Φ(x)) has kinks at x = Φ⁻¹(t - ε), Φ⁻¹(t), Φ⁻¹(t + ε), so a single
Gauss-Hermite rule converges slowly on it.  The default route integrates each
smooth piece with composite Gauss-Legendre panels and handles the region where
ℓ ≡ 1 in closed form.  Passing a :class:`QuadratureRule` selects plain
Gauss-Hermite instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtri

from .empirical import KernelSpec
from .errors import DegreeTooLarge, InvalidParameter
from .sampler import normal_cdf

MAX_DEGREE = 500
MAX_PAIR_DEGREE = 50
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _check_degree(k: int, limit: int = MAX_DEGREE) -> int:
    if int(k) != k or k < 0:
        raise InvalidParameter(f"degree must be a nonnegative integer, got {k!r}")
    if k > limit:
        raise DegreeTooLarge(f"degree {k} exceeds {limit}")
    return int(k)


def hermite_table(K: int, x) -> np.ndarray:
    """Rows h_0(x), ..., h_K(x) by the normalized three-term recurrence."""
    K = _check_degree(K)
    x = np.asarray(x, dtype=float)
    out = np.empty((K + 1,) + x.shape)
    out[0] = 1.0
    if K >= 1:
        out[1] = x
    for k in range(1, K):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


def h_eval(k: int, x):
    v = hermite_table(k, x)[-1]
    return float(v) if np.ndim(x) == 0 else v


def hermite_functions(K: int, x) -> np.ndarray:
    """Rows h_k(x) φ(x); same recurrence, seeded with φ so nothing overflows."""
    K = _check_degree(K)
    x = np.asarray(x, dtype=float)
    out = np.empty((K + 1,) + x.shape)
    out[0] = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    if K >= 1:
        out[1] = x * out[0]
    for k in range(1, K):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Hermite nodes and weights for ∫ f dμ (weights sum to 1)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def gauss_hermite(order: int = 128) -> QuadratureRule:
    if order < 1:
        raise InvalidParameter("quadrature order must be positive")
    x, w = hermegauss(order)
    return QuadratureRule(order, x, w / w.sum())


@dataclass(frozen=True)
class PanelRule:
    """Composite Gauss-Legendre on panels no wider than ``width``."""

    order: int = 32
    width: float = 0.25
    cutoff: float = 40.0

    def nodes_weights(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        if b <= a:
            return np.empty(0), np.empty(0)
        g, w = leggauss(self.order)
        m = max(1, int(math.ceil((b - a) / self.width)))
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(edges)[:, None]
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        return (mid + half * g).ravel(), (half * w).ravel()


DEFAULT_PANELS = PanelRule()
_default_gh: QuadratureRule | None = None


def default_rule() -> QuadratureRule:
    global _default_gh
    if _default_gh is None:
        _default_gh = gauss_hermite(128)
    return _default_gh


def pair_expectation(sigma: float, k: int, k2: int, rule: QuadratureRule | None = None) -> float:
    """E h_k(U) h_k2(V) for unit-variance (U, V) with correlation σ.

    Uses V = σU + √(1-σ²) W with W independent of U, giving a tensor
    Gauss-Hermite sum that is exact once the order exceeds (k + k2)/2.
    """
    k = _check_degree(k, MAX_PAIR_DEGREE)
    k2 = _check_degree(k2, MAX_PAIR_DEGREE)
    if not -1.0 <= sigma <= 1.0:
        raise InvalidParameter("sigma must lie in [-1, 1]")
    rule = rule or default_rule()
    x, w = rule.nodes, rule.weights
    hu = hermite_table(k, x)[-1]
    v = sigma * x[:, None] + math.sqrt(max(1.0 - sigma * sigma, 0.0)) * x[None, :]
    hv = hermite_table(k2, v)[-1]
    return float(np.dot(w * hu, hv @ w))


def gram_matrix(J: int, rule: QuadratureRule | None = None) -> np.ndarray:
    """∫ h_i h_j dμ for i, j ≤ J."""
    rule = rule or default_rule()
    h = hermite_table(J, rule.nodes)
    return (h * rule.weights) @ h.T


def _window(kernel: KernelSpec, t: float, cutoff: float):
    """x-breakpoints of the window where ℓ(t - Φ(x)) is neither 0 nor 1."""
    e = kernel.epsilon
    lo_y, hi_y = t - e, t + e
    lo = ndtri(lo_y) if lo_y > 0 else -cutoff
    hi = ndtri(hi_y) if hi_y < 1 else cutoff
    pts = [max(lo, -cutoff)]
    if 0 < t < 1 and lo < ndtri(t) < hi:
        pts.append(ndtri(t))
    pts.append(min(hi, cutoff))
    return pts


def coefficients(kernel: KernelSpec, t: float, K: int, derivative: bool = False,
                 rule: QuadratureRule | PanelRule | None = None) -> np.ndarray:
    """c_0(t), ..., c_K(t) (or their t-derivatives)."""
    K = _check_degree(K)
    t = float(t)
    e = kernel.epsilon
    f = kernel.ell_prime if derivative else kernel.ell
    if isinstance(rule, QuadratureRule):
        h = hermite_table(K, rule.nodes)
        return h @ (rule.weights * f(t - normal_cdf(rule.nodes)))

    panels = rule or DEFAULT_PANELS
    out = np.zeros(K + 1)
    if t + e <= 0.0 or (derivative and t - e >= 1.0):
        return out
    if not derivative and t - e > 0.0:
        # ℓ ≡ 1 on x < a = Φ⁻¹(t-ε): ∫_{-∞}^a h_k dμ = -h_{k-1}(a) φ(a) / √k
        if t - e >= 1.0:
            out[0] = 1.0
            return out
        a = ndtri(t - e)
        out[0] = normal_cdf(a)
        if K >= 1:
            hf = hermite_functions(K - 1, a)
            out[1:] = -hf / np.sqrt(np.arange(1, K + 1))
    pts = _window(kernel, t, panels.cutoff)
    xs, ws = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        x, w = panels.nodes_weights(a, b)
        xs.append(x)
        ws.append(w)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    out += hermite_functions(K, x) @ (w * f(t - normal_cdf(x)))
    return out


def coeff(kernel: KernelSpec, k: int, t: float, rule=None, derivative: bool = False) -> float:
    return float(coefficients(kernel, t, k, derivative, rule)[-1])


@dataclass(frozen=True, eq=False)
class HermiteCoefficientTable:
    kernel: KernelSpec
    t_grid: np.ndarray
    K_max: int
    c: np.ndarray        # shape (len(t_grid), K_max + 1)
    c_prime: np.ndarray
    quadrature: str

    def to_csv(self, path, derivative: bool = False) -> None:
        """Rows are t-grid points, columns t, c_0, ..., c_K."""
        vals = self.c_prime if derivative else self.c
        header = ",".join(["t"] + [f"k{k}" for k in range(self.K_max + 1)])
        np.savetxt(path, np.column_stack([self.t_grid, vals]), delimiter=",",
                   fmt="%.17g", header=header, comments="")


def coefficient_table(kernel: KernelSpec, t_grid, K_max: int, rule=None) -> HermiteCoefficientTable:
    t_grid = np.asarray(t_grid, dtype=float)
    c = np.array([coefficients(kernel, t, K_max, False, rule) for t in t_grid])
    cp = np.array([coefficients(kernel, t, K_max, True, rule) for t in t_grid])
    if isinstance(rule, QuadratureRule):
        desc = f"gauss_hermite(order={rule.order})"
    else:
        p = rule or DEFAULT_PANELS
        desc = f"legendre_panels(order={p.order},width={p.width:g},cutoff={p.cutoff:g})"
    return HermiteCoefficientTable(kernel, t_grid, K_max, c, cp, desc)


@dataclass(frozen=True)
class AggregationResidual:
    partial_sum: float
    target: float
    residual: float


def aggregation_target(kernel: KernelSpec, t: float) -> float:
    """Closed form of Σ_{k≥1} c_k'(t)²: the variance of ℓ'(t - U), U uniform."""
    return max(float(kernel.window_variance_prime(t)), 0.0)


def aggregation_residual(kernel: KernelSpec, t: float, K: int = 200, rule=None) -> AggregationResidual:
    if K < 1:
        raise InvalidParameter("K must be positive")
    cp = coefficients(kernel, t, K, True, rule)
    ps = float(np.sum(cp[1:] ** 2))
    target = aggregation_target(kernel, t)
    return AggregationResidual(ps, target, target - ps)


def aggregation_partial_sums(kernel: KernelSpec, t: float, K: int, rule=None) -> np.ndarray:
    """Σ_{k=1}^{J} c_k'(t)² for J = 1..K."""
    cp = coefficients(kernel, t, K, True, rule)
    return np.cumsum(cp[1:] ** 2)
