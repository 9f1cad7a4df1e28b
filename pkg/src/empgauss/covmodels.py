"""Correlation structures of standardized Gaussian sequences.

A :class:`FamilySpec` names a parametric family (OU, long-range dependent,
equicorrelated, ...) and knows its growth curve ``Δ(n)``; :func:`build_family`
turns it into a validated :class:`CovarianceModel` of a given dimension.

The dependence measure throughout is ``Δ = Σ_{i≠j} |C_ij|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import (
    InvalidParameter,
    NotPositiveSemidefinite,
    NotSymmetric,
    NotUnitDiagonal,
)

SYMMETRY_TOL = 1e-12
DIAGONAL_TOL = 1e-12
PSD_TOL = 1e-10
# above this size the eigenvalue floor is checked with a shifted Cholesky
EIGEN_LIMIT = 1000
DENSE_CAP = 10_000
_CHUNK = 1 << 20

FAMILIES = (
    "explicit",
    "iid",
    "ou",
    "lrd",
    "equicorrelated",
    "block_identical",
    "custom_stationary",
)
STATIONARY = ("iid", "ou", "lrd", "equicorrelated", "custom_stationary")

GrowthCurve = Callable[[int], float]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


@dataclass(frozen=True)
class FamilySpec:
    """A covariance family tag plus its parameters.

    Parameters by family::

        iid                  -
        ou                   alpha > 0               r(k) = exp(-alpha k)
        lrd                  D in (0, 1), shift >= 0 r(k) = (k + shift)^(-D), k >= 1
        equicorrelated       rho in [0, 1)
        block_identical      m >= 1, xi in [0, 1)
        custom_stationary    r: r[0] == 1, lags 0, 1, 2, ... (or a callable of lags)
    """

    family: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}")
        object.__setattr__(self, "params", dict(self.params))
        p = self.params
        if self.family == "ou":
            if not p.get("alpha", 0) > 0:
                raise InvalidParameter("ou requires alpha > 0")
        elif self.family == "lrd":
            if not 0 < p.get("D", 0) < 1:
                raise InvalidParameter("lrd requires 0 < D < 1")
            p.setdefault("shift", 1.0)
            if p["shift"] < 0:
                raise InvalidParameter("lrd shift must be >= 0")
        elif self.family == "equicorrelated":
            if not 0 <= p.get("rho", -1) < 1:
                raise InvalidParameter("equicorrelated requires 0 <= rho < 1")
        elif self.family == "block_identical":
            m = p.get("m", 0)
            if int(m) != m or m < 1:
                raise InvalidParameter("block_identical requires integer m >= 1")
            p["m"] = int(m)
            if not 0 <= p.get("xi", -1) < 1:
                raise InvalidParameter("block_identical requires 0 <= xi < 1")
        elif self.family == "custom_stationary":
            r = p.get("r")
            if r is None:
                raise InvalidParameter("custom_stationary requires r")
            if not callable(r):
                r = np.asarray(r, dtype=float)
                if r.ndim != 1 or r.size == 0 or abs(r[0] - 1.0) > DIAGONAL_TOL:
                    raise InvalidParameter("custom r must be 1-d with r[0] == 1")
                if np.any(np.abs(r) > 1.0):
                    raise InvalidParameter("custom r entries must lie in [-1, 1]")
                p["r"] = r

    # convenience constructors
    @classmethod
    def iid(cls) -> "FamilySpec":
        return cls("iid")

    @classmethod
    def ou(cls, alpha: float) -> "FamilySpec":
        return cls("ou", {"alpha": float(alpha)})

    @classmethod
    def lrd(cls, D: float, shift: float = 1.0) -> "FamilySpec":
        return cls("lrd", {"D": float(D), "shift": float(shift)})

    @classmethod
    def equicorrelated(cls, rho: float) -> "FamilySpec":
        return cls("equicorrelated", {"rho": float(rho)})

    @classmethod
    def block_identical(cls, m: int, xi: float) -> "FamilySpec":
        return cls("block_identical", {"m": int(m), "xi": float(xi)})

    @classmethod
    def custom_stationary(cls, r) -> "FamilySpec":
        return cls("custom_stationary", {"r": r})

    @property
    def stationary(self) -> bool:
        return self.family in STATIONARY

    @property
    def label(self) -> str:
        if self.family == "custom_stationary":
            r = self.params["r"]
            return "custom_stationary(callable)" if callable(r) else f"custom_stationary(len={r.size})"
        if not self.params:
            return self.family
        inner = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for k, v in sorted(self.params.items()):
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "FamilySpec":
        d = dict(d)
        try:
            family = d.pop("family")
        except KeyError:
            raise InvalidParameter("family spec needs a 'family' key") from None
        return cls(family, d)

    def autocorrelation(self, lags) -> np.ndarray:
        """r(k) at integer lags for the stationary families."""
        lags = np.asarray(lags, dtype=float)
        f, p = self.family, self.params
        if f == "iid":
            return np.where(lags == 0, 1.0, 0.0)
        if f == "ou":
            return np.exp(-p["alpha"] * np.abs(lags))
        if f == "lrd":
            k = np.abs(lags)
            with np.errstate(divide="ignore"):
                r = np.power(k + p["shift"], -p["D"])
            return np.where(k == 0, 1.0, r)
        if f == "equicorrelated":
            return np.where(lags == 0, 1.0, p["rho"])
        if f == "custom_stationary":
            r = p["r"]
            k = np.abs(lags).astype(np.int64)
            if callable(r):
                return np.asarray(r(k), dtype=float)
            if k.size and k.max() >= r.size:
                raise InvalidParameter(
                    f"custom r has {r.size} lags; lag {int(k.max())} requested"
                )
            return r[k]
        raise InvalidParameter(f"{f} is not stationary")

    def delta(self, n: int) -> float:
        """Growth curve Δ(n), without materializing a matrix."""
        n = _check_n(n)
        f, p = self.family, self.params
        if f == "iid":
            return 0.0
        if f == "equicorrelated":
            return float(n * (n - 1)) * p["rho"]
        if f == "block_identical":
            return _block_delta(n, p["m"], p["xi"])
        if f == "explicit":
            raise InvalidParameter("explicit models have no growth curve")
        if f == "ou" and n > 50 * _CHUNK:
            return _ou_delta_closed(n, p["alpha"])
        return _stationary_delta(self.autocorrelation, n)


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer, got {n!r}")
    return int(n)


def _stationary_delta(acf: Callable, n: int) -> float:
    # Δ(n) = 2 Σ_{d=1}^{n-1} (n - d) |r(d)|, O(n) time, O(chunk) memory
    total = 0.0
    for start in range(1, n, _CHUNK):
        d = np.arange(start, min(start + _CHUNK, n), dtype=float)
        total += float(np.dot(n - d, np.abs(acf(d))))
    return 2.0 * total


def _ou_delta_closed(n: int, alpha: float) -> float:
    q = math.exp(-alpha)
    qn1 = q ** (n - 1)
    s1 = q * (1 - qn1) / (1 - q)  # Σ q^d
    s2 = q * (1 - n * qn1 + (n - 1) * qn1 * q) / (1 - q) ** 2  # Σ d q^d
    return 2.0 * (n * s1 - s2)


def _block_delta(n: int, m: int, xi: float) -> float:
    if m > n:
        raise InvalidParameter(f"block size m={m} exceeds n={n}")
    k = n - m
    return m * (m - 1) + 2.0 * m * k * math.sqrt(xi) + k * (k - 1) * xi


def ou_delta_limit(alpha: float) -> float:
    """lim Δ(n)/n for the OU family, 2e^{-α}/(1-e^{-α})."""
    q = math.exp(-alpha)
    return 2 * q / (1 - q)


def lrd_delta_constant(D: float) -> float:
    """Leading constant of Δ(n) ~ c n^{2-D} for r(k) ~ k^{-D}."""
    return 2.0 / ((1 - D) * (2 - D))


def block_size_for_delta(delta: float) -> int:
    """Number of identical coordinates ⌊(1+√(1+4Δ))/2⌋ used for a target Δ."""
    if delta < 0:
        raise InvalidParameter("delta must be nonnegative")
    m = int(math.floor((1 + math.sqrt(1 + 4 * delta)) / 2))
    # guard against floating error at perfect squares
    while m * (m - 1) > delta:
        m -= 1
    while (m + 1) * m <= delta:
        m += 1
    return m


def block_spec_for_delta(n: int, delta: float) -> FamilySpec:
    """Block-identical family whose Δ(n) equals ``delta``.

    The first ``m`` coordinates share one value Z; the rest are
    ``√ξ Z + √(1-ξ) ε_j``.  ξ solves
    ``(n-m)(n-m-1) ξ + 2m(n-m) √ξ + m(m-1) = Δ``.
    """
    from .errors import BlockExceedsDimension

    n = _check_n(n)
    m = block_size_for_delta(delta)
    if m > n:
        raise BlockExceedsDimension(f"block size {m} for delta={delta} exceeds n={n}")
    k = n - m
    rest = delta - m * (m - 1)
    a, b = float(k * (k - 1)), 2.0 * m * k
    if rest <= 0 or k == 0:
        s = 0.0
    elif a == 0.0:
        s = rest / b
    else:
        s = (-b + math.sqrt(b * b + 4 * a * rest)) / (2 * a)
    xi = s * s
    if xi >= 1:
        raise InvalidParameter(f"delta={delta} not reachable with n={n}")
    return FamilySpec.block_identical(m, xi)


class CovarianceModel:
    """Validated n×n correlation matrix with its provenance and Δ.

    Stationary and structured families defer building the dense matrix
    until :attr:`entries` is first read, so that large ``n`` can be sampled
    through a structured factor without ever holding ``C``.
    """

    def __init__(self, n, family, delta, *, entries=None, builder=None,
                 psd_check="eigen", min_eigenvalue=None):
        self.n = int(n)
        self.family = family
        self.delta = float(delta)
        self.psd_check = psd_check
        self.min_eigenvalue = min_eigenvalue
        if entries is not None:
            entries = np.array(entries, dtype=float)
            entries.setflags(write=False)
        self._entries = entries
        self._builder = builder

    @property
    def entries(self) -> np.ndarray:
        if self._entries is None:
            c = self._builder()
            c.setflags(write=False)
            self._entries = c
        return self._entries

    @property
    def materialized(self) -> bool:
        return self._entries is not None

    @property
    def model_id(self) -> str:
        return f"{self.family.label}/n={self.n}"

    def __repr__(self):
        return f"CovarianceModel({self.model_id}, delta={self.delta:.6g})"


def _upper_delta(c: np.ndarray) -> float:
    iu = np.triu_indices(c.shape[0], k=1)
    return 2.0 * float(np.sum(np.abs(c[iu])))


def _psd_floor(c: np.ndarray) -> tuple[str, float | None]:
    """Check min eigenvalue >= -PSD_TOL, raising NotPositiveSemidefinite."""
    n = c.shape[0]
    if n <= EIGEN_LIMIT:
        lam = float(scipy.linalg.eigvalsh(c, subset_by_index=[0, 0])[0]) if n > 1 else float(c[0, 0])
        if lam < -PSD_TOL:
            raise NotPositiveSemidefinite(f"minimum eigenvalue {lam:.3e} < {-PSD_TOL:g}")
        return "eigen", lam
    # C + tol·I is positive definite iff λ_min(C) > -tol
    shifted = c + PSD_TOL * np.eye(n)
    try:
        scipy.linalg.cholesky(shifted, lower=True, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NotPositiveSemidefinite(
            f"shifted Cholesky failed: minimum eigenvalue below {-PSD_TOL:g}"
        ) from None
    return "cholesky", None


def build_explicit(matrix) -> CovarianceModel:
    c = np.array(matrix, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise InvalidParameter(f"expected a nonempty square matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidParameter("matrix has non-finite entries")
    if np.max(np.abs(c - c.T)) > SYMMETRY_TOL:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    if np.max(np.abs(np.diag(c) - 1.0)) > DIAGONAL_TOL:
        raise NotUnitDiagonal("diagonal entries must equal 1 within 1e-12")
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    check, lam = _psd_floor(c)
    return CovarianceModel(
        c.shape[0], FamilySpec("explicit"), _upper_delta(c),
        entries=c, psd_check=check, min_eigenvalue=lam,
    )


def _block_matrix(n: int, m: int, xi: float) -> np.ndarray:
    c = np.full((n, n), xi)
    c[:m, :] = math.sqrt(xi)
    c[:, :m] = math.sqrt(xi)
    c[:m, :m] = 1.0
    np.fill_diagonal(c, 1.0)
    return c


def build_family(spec: FamilySpec, n: int) -> CovarianceModel:
    """Dimension-``n`` model for a family.

    OU, equicorrelated, iid and block families are PSD by construction
    (each has an explicit factor); their eigenvalue floor is still checked
    numerically up to ``EIGEN_LIMIT``.  LRD and custom Toeplitz matrices are
    always checked, and rejected if they fail.
    """
    n = _check_n(n)
    if spec.family == "explicit":
        raise InvalidParameter("use build_explicit for explicit matrices")
    delta = spec.delta(n)
    if spec.family == "block_identical":
        m, xi = spec.params["m"], spec.params["xi"]
        builder = lambda: _block_matrix(n, m, xi)  # noqa: E731
    else:
        builder = lambda: scipy.linalg.toeplitz(spec.autocorrelation(np.arange(n)))  # noqa: E731

    by_construction = spec.family in ("iid", "ou", "equicorrelated", "block_identical")
    if by_construction and n > EIGEN_LIMIT:
        return CovarianceModel(n, spec, delta, builder=builder, psd_check="construction")
    if n > DENSE_CAP:
        raise InvalidParameter(f"n={n} exceeds dense cap {DENSE_CAP} for {spec.family}")
    c = builder()
    check, lam = _psd_floor(c)
    return CovarianceModel(n, spec, delta, entries=c, psd_check=check, min_eigenvalue=lam)


def dependence_measure(model: CovarianceModel) -> float:
    """Δ = 2 Σ_{i<j} |C_ij| summed over the strict upper triangle.

    Falls back to the model's stored Δ (computed by the O(n) growth formula)
    when the dense matrix has not been built and would be large.
    """
    if model.materialized or model.n <= 5000:
        return _upper_delta(model.entries)
    return model.delta


@dataclass(frozen=True)
class GrowthRow:
    n: int
    delta: float
    delta_over_n2: float


def growth_diagnostics(spec: FamilySpec, n_list: Iterable[int]) -> list[GrowthRow]:
    ns = [_check_n(n) for n in n_list]
    if not ns:
        raise InvalidParameter("n_list must be nonempty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameter("n_list must be strictly increasing")
    rows = []
    for n in ns:
        d = spec.delta(n)
        rows.append(GrowthRow(n, d, d / float(n) ** 2))
    return rows


def as_condition_partial_sums(
    spec: Union[FamilySpec, GrowthCurve], gamma: float, i_max: int
) -> np.ndarray:
    """Partial sums ``S_I = Σ_{i≤I} (Δ(⌊γ^i⌋)/⌊γ^i⌋²)^{1/3}``, I = 1..i_max.

    ``spec`` may be a family or any callable growth curve ``n -> Δ(n)``.
    A finite prefix cannot decide convergence; callers read the trend.
    """
    if not gamma > 1:
        raise InvalidParameter("gamma must exceed 1")
    if int(i_max) != i_max or i_max < 1:
        raise InvalidParameter("i_max must be a positive integer")
    curve = spec.delta if isinstance(spec, FamilySpec) else spec
    incr = np.empty(int(i_max))
    for i in range(1, int(i_max) + 1):
        n = int(math.floor(gamma ** i))
        incr[i - 1] = (max(curve(n), 0.0) / float(n) ** 2) ** (1.0 / 3.0)
    return np.cumsum(incr)


def save_matrix_csv(path, model_or_matrix) -> None:
    c = model_or_matrix.entries if isinstance(model_or_matrix, CovarianceModel) else model_or_matrix
    np.savetxt(path, np.asarray(c), delimiter=",", fmt="%.17g")


def load_matrix_csv(path) -> CovarianceModel:
    c = np.loadtxt(path, delimiter=",", ndmin=2)
    return build_explicit(c)
