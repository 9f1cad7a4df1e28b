"""Empirical distribution of Φ(X_i), its kernel-smoothed version, and sup-deviations.

The smoothing kernel has a triangular derivative,
``ℓ'(x) = (ε - |x|)⁺ / ε²``, so ℓ is a C¹ ramp from 0 (at -ε) to 1 (at ε).
Because every U_i = Φ(X_i) is exactly Uniform(0, 1), the means are known in
closed form: E F̂_n(t) = clamp(t, 0, 1) and E Q̂_n(t) = ∫₀¹ ℓ(t - y) dy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, RangeExceedsPath
from .sampler import UniformPath


@dataclass(frozen=True)
class KernelSpec:
    epsilon: float

    def __post_init__(self):
        eps = float(self.epsilon)
        if not 0.0 < eps <= 0.5:
            raise InvalidParameter(f"kernel epsilon must lie in (0, 1/2], got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def lipschitz(self) -> float:
        """Sup of ℓ', which bounds the slope of both Q̂_n and E Q̂_n."""
        return 1.0 / self.epsilon

    def ell(self, x):
        e = self.epsilon
        x = np.asarray(x, dtype=float)
        left = (x + e) ** 2 / (2 * e * e)
        right = 1.0 - (e - x) ** 2 / (2 * e * e)
        return np.where(x <= -e, 0.0, np.where(x <= 0, left, np.where(x <= e, right, 1.0)))

    def ell_prime(self, x):
        e = self.epsilon
        x = np.asarray(x, dtype=float)
        return np.maximum(e - np.abs(x), 0.0) / (e * e)

    def ell_integral(self, x):
        """Λ(x) = ∫_{-∞}^x ℓ; equals x for x ≥ ε."""
        e = self.epsilon
        x = np.asarray(x, dtype=float)
        left = (x + e) ** 3 / (6 * e * e)
        right = e / 6.0 + x - (e ** 3 - (e - x) ** 3) / (6 * e * e)
        return np.where(x <= -e, 0.0, np.where(x <= 0, left, np.where(x <= e, right, x)))

    def ell_prime_sq_integral(self, x):
        """∫_{-∞}^x ℓ'(s)² ds."""
        e = self.epsilon
        x = np.asarray(x, dtype=float)
        e4 = e ** 4
        left = (x + e) ** 3 / (3 * e4)
        right = 1.0 / (3 * e) + (e ** 3 - (e - x) ** 3) / (3 * e4)
        return np.where(x <= -e, 0.0, np.where(x <= 0, left, np.where(x <= e, right, 2.0 / (3 * e))))

    def smoothed_mean(self, t):
        """E Q̂_n(t) = ∫₀¹ ℓ(t - y) dy."""
        t = np.asarray(t, dtype=float)
        return self.ell_integral(t) - self.ell_integral(t - 1.0)

    def window_mean_prime(self, t):
        """∫₀¹ ℓ'(t - y) dy."""
        t = np.asarray(t, dtype=float)
        return self.ell(t) - self.ell(t - 1.0)

    def window_second_moment_prime(self, t):
        """∫₀¹ ℓ'(t - y)² dy."""
        t = np.asarray(t, dtype=float)
        return self.ell_prime_sq_integral(t) - self.ell_prime_sq_integral(t - 1.0)

    def window_variance_prime(self, t):
        """∫₀¹ ℓ'(t-y)² dy - (∫₀¹ ℓ'(t-y) dy)², unclipped."""
        return self.window_second_moment_prime(t) - self.window_mean_prime(t) ** 2


def kernel_eval(kernel: KernelSpec, x, derivative: bool = False):
    v = kernel.ell_prime(x) if derivative else kernel.ell(x)
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class DeviationResult:
    sup_value: float
    argmax_t: float
    method: str
    certified_error: float = 0.0


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, UniformPath) else np.asarray(u, dtype=float)


def _sorted(u) -> np.ndarray:
    return u.sorted_view if isinstance(u, UniformPath) else np.sort(np.asarray(u, dtype=float))


def ks_from_sorted(s: np.ndarray) -> np.ndarray:
    """sup_t |F̂_n(t) - t| for sorted samples along axis 0 (1-d or 2-d)."""
    n = s.shape[0]
    i = np.arange(1, n + 1, dtype=float).reshape((-1,) + (1,) * (s.ndim - 1))
    dplus = (i / n - s).max(axis=0)
    dminus = (s - (i - 1) / n).max(axis=0)
    return np.maximum(dplus, dminus)


def ecdf_sup_deviation(u) -> DeviationResult:
    s = _sorted(u)
    n = s.size
    if n < 1:
        raise InvalidParameter("need at least one sample")
    i = np.arange(1, n + 1, dtype=float)
    cand = np.maximum(i / n - s, s - (i - 1) / n)
    k = int(np.argmax(cand))  # first maximizer = smallest t since s is sorted
    return DeviationResult(float(cand[k]), float(s[k]), "exact_order_statistics", 0.0)


def ecdf_eval(u, t) -> np.ndarray:
    """F̂_n(t) = fraction of U_i ≤ t."""
    s = _sorted(u)
    return np.searchsorted(s, np.asarray(t, dtype=float), side="right") / s.size


def qhat_eval(u, kernel: KernelSpec, t):
    """Q̂_n(t) = mean of ℓ(t - U_i), by direct summation."""
    v = _values(u)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape)
    step = max(1, 4_000_000 // max(v.size, 1))
    for a in range(0, t_arr.size, step):
        blk = t_arr[a:a + step]
        out[a:a + step] = kernel.ell(blk[:, None] - v[None, :]).mean(axis=1)
    return float(out[0]) if np.ndim(t) == 0 else out


class SmoothedProcess:
    """Fast evaluation of Q̂_n on many t via sorted prefix sums.

    ℓ(t - u) is 1 for u ≤ t-ε, a quadratic in u on (t-ε, t] and (t, t+ε),
    and 0 beyond, so each t costs three binary searches.
    """

    def __init__(self, u, kernel: KernelSpec):
        s = _sorted(u)
        self.kernel = kernel
        self.n = s.size
        self._s = s
        self._s1 = np.concatenate(([0.0], np.cumsum(s)))
        self._s2 = np.concatenate(([0.0], np.cumsum(s * s)))

    def __call__(self, t) -> np.ndarray:
        e = self.kernel.epsilon
        t = np.asarray(t, dtype=float)
        a, b = t - e, t + e
        s, s1, s2 = self._s, self._s1, self._s2
        ia = np.searchsorted(s, a, side="right")
        it = np.searchsorted(s, t, side="right")
        ib = np.searchsorted(s, b, side="left")
        c1 = it - ia
        sq1 = (s2[it] - s2[ia]) - 2 * a * (s1[it] - s1[ia]) + a * a * c1
        c2 = ib - it
        sq2 = (s2[ib] - s2[it]) - 2 * b * (s1[ib] - s1[it]) + b * b * c2
        total = ia + c1 - sq1 / (2 * e * e) + sq2 / (2 * e * e)
        return np.clip(total / self.n, 0.0, 1.0)


def sup_grid(kernel: KernelSpec, tol: float) -> tuple[np.ndarray, float]:
    """Uniform grid over [-ε, 1+ε] with step at most tol·ε/2."""
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    e = kernel.epsilon
    width = 1.0 + 2.0 * e
    m = int(np.ceil(width / (tol * e / 2.0)))
    return np.linspace(-e, 1.0 + e, m + 1), width / m


def qhat_sup_deviation(u, kernel: KernelSpec, tol: float = 1e-3, grid=None) -> DeviationResult:
    """sup_t |Q̂_n(t) - E Q̂_n(t)| on a certified grid.

    Both terms are (1/ε)-Lipschitz in t with slopes of the same sign, so
    the difference is too; the true sup exceeds the grid max by at most
    (1/ε)·h/2.  Outside [-ε, 1+ε] the deviation is identically zero.
    """
    if grid is None:
        grid = sup_grid(kernel, tol)
    t, h = grid
    g = np.abs(SmoothedProcess(u, kernel)(t) - kernel.smoothed_mean(t))
    k = int(np.argmax(g))
    return DeviationResult(float(g[k]), float(t[k]), "certified_grid", kernel.lipschitz * h / 2.0)


@dataclass(frozen=True)
class FluctuationProfile:
    n_values: np.ndarray
    deviations: np.ndarray
    gaps: np.ndarray
    max_scaled_gap: float


def prefix_deviations(u, n_lo: int, n_hi: int) -> np.ndarray:
    """D_n for n = n_lo..n_hi, each on the first n entries of the path."""
    v = _values(u)
    s = np.sort(v[:n_lo])
    out = np.empty(n_hi - n_lo + 1)
    out[0] = ks_from_sorted(s)
    for j, n in enumerate(range(n_lo + 1, n_hi + 1), start=1):
        x = v[n - 1]
        s = np.insert(s, np.searchsorted(s, x), x)
        out[j] = ks_from_sorted(s)
    return out


def fluctuation_profile(u, n_range) -> FluctuationProfile:
    """Successive gaps |D_n - D_{n+1}| and max over the range of (n+1)·gap."""
    n_lo, n_hi = int(n_range[0]), int(n_range[1])
    v = _values(u)
    if n_lo < 1 or n_hi <= n_lo:
        raise InvalidParameter("n_range must satisfy 1 <= lo < hi")
    if n_hi > v.size:
        raise RangeExceedsPath(f"range ends at {n_hi} but path has {v.size} entries")
    d = prefix_deviations(v, n_lo, n_hi)
    gaps = np.abs(np.diff(d))
    ns = np.arange(n_lo, n_hi + 1)
    scaled = (ns[:-1] + 1) * gaps
    return FluctuationProfile(ns, d, gaps, float(scaled.max()))
