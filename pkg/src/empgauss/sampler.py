"""Reproducible draws of X ~ N(0, C) and their probability-integral transform.

Every replication owns an independent Philox stream keyed by
``(master_seed, replication_index)``, so replications can be generated in any
order, on any worker, and still reproduce bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.signal
from scipy.special import erfc

from .covmodels import CovarianceModel
from .errors import FactorizationFailed

JITTER_START = 1e-12
JITTER_MAX = 1e-8
RECONSTRUCTION_TOL = 1e-8
_RECONSTRUCT_CHECK_LIMIT = 2000

_U_LO = np.nextafter(0.0, 1.0)
_U_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular L with L Lᵀ = C + jitter_used·I.

    ``kind`` selects the representation used by :meth:`apply`:

    ``dense``     explicit L
    ``identity``  L = I
    ``ar1``       L[k, j] = φ^{k-j} s_j, s_0 = 1, s_j = √(1-φ²)  (OU)
    ``compound``  L[k, j] = a_j (j < k), L[k, k] = d_k          (equicorrelated)
    ``block``     first column [1]*m + [√ξ]*(n-m), diagonal √(1-ξ) past m
    """

    n: int
    kind: str
    jitter_used: float = 0.0
    dense: np.ndarray | None = None
    coef: dict = field(default_factory=dict)

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Compute L @ z for z of shape (n,) or (n, B)."""
        z = np.asarray(z, dtype=float)
        if self.kind == "dense":
            return self.dense @ z
        if self.kind == "identity":
            return z.copy()
        if self.kind == "ar1":
            phi = self.coef["phi"]
            innov = z * math.sqrt(1.0 - phi * phi)
            innov[0] = z[0]
            return scipy.signal.lfilter([1.0], [1.0, -phi], innov, axis=0)
        if self.kind == "compound":
            a, d = self.coef["a"], self.coef["d"]
            shape = (-1,) + (1,) * (z.ndim - 1)
            az = a.reshape(shape) * z
            out = d.reshape(shape) * z
            out[1:] += np.cumsum(az[:-1], axis=0)
            return out
        if self.kind == "block":
            m, xi = self.coef["m"], self.coef["xi"]
            col = np.full(self.n, math.sqrt(xi))
            col[:m] = 1.0
            diag = np.full(self.n, math.sqrt(1.0 - xi))
            diag[:m] = 0.0
            diag[0] = 1.0
            shape = (-1,) + (1,) * (z.ndim - 1)
            out = diag.reshape(shape) * z
            out[1:] += col[1:].reshape((-1,) + (1,) * (z.ndim - 1)) * z[0]
            return out
        raise ValueError(f"unknown factor kind {self.kind!r}")

    @property
    def matrix(self) -> np.ndarray:
        """Dense L (materialized on demand for structured kinds)."""
        if self.kind == "dense":
            return self.dense
        return self.apply(np.eye(self.n))


def _compound_coefficients(n: int, rho: float) -> tuple[np.ndarray, np.ndarray]:
    a = np.zeros(n)
    d = np.zeros(n)
    s = 0.0
    for k in range(n):
        d[k] = math.sqrt(max(1.0 - s, 0.0))
        a[k] = (rho - s) / d[k] if d[k] > 0 else 0.0
        s += a[k] * a[k]
    return a, d


def _dense_cholesky(c: np.ndarray) -> tuple[np.ndarray, float]:
    n = c.shape[0]
    jitter = 0.0
    while True:
        try:
            a = c + jitter * np.eye(n) if jitter else c
            low = scipy.linalg.cholesky(a, lower=True, check_finite=False)
            if np.all(np.isfinite(low)):
                return low, jitter
        except np.linalg.LinAlgError:
            pass
        jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > JITTER_MAX * (1 + 1e-9):
            raise FactorizationFailed(
                f"Cholesky failed with jitter up to {JITTER_MAX:g}; covariance is effectively invalid"
            )


def factorize(model: CovarianceModel, structured: bool = True) -> CholeskyFactor:
    """Cholesky factor of the model's correlation matrix.

    With ``structured`` (default) the OU, equicorrelated, iid and block
    families use their exact closed-form triangular factor, which never
    materializes C.  Everything else goes through a dense Cholesky with a
    jitter ladder 1e-12, 1e-11, ..., 1e-8.
    """
    fam = model.family
    p = fam.params
    n = model.n
    if structured:
        if fam.family == "iid" or (fam.family == "equicorrelated" and p["rho"] == 0.0):
            return CholeskyFactor(n, "identity")
        if fam.family == "ou":
            return CholeskyFactor(n, "ar1", coef={"phi": math.exp(-p["alpha"])})
        if fam.family == "equicorrelated":
            a, d = _compound_coefficients(n, p["rho"])
            return CholeskyFactor(n, "compound", coef={"a": a, "d": d})
        if fam.family == "block_identical":
            return CholeskyFactor(n, "block", coef={"m": p["m"], "xi": p["xi"]})
    low, jitter = _dense_cholesky(model.entries)
    if n <= _RECONSTRUCT_CHECK_LIMIT:
        err = np.max(np.abs(low @ low.T - model.entries - jitter * np.eye(n)))
        if err > RECONSTRUCTION_TOL:
            raise FactorizationFailed(f"reconstruction error {err:.3e} exceeds {RECONSTRUCTION_TOL:g}")
    low.setflags(write=False)
    return CholeskyFactor(n, "dense", jitter_used=jitter, dense=low)


def replication_rng(master_seed: int, replication_index: int) -> np.random.Generator:
    """Counter-based generator dedicated to one replication."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replication_index),))
    return np.random.Generator(np.random.Philox(ss))


def standard_normals(n: int, master_seed: int, replication_index: int) -> np.ndarray:
    return replication_rng(master_seed, replication_index).standard_normal(n)


@dataclass(frozen=True, eq=False)
class GaussianPath:
    values: np.ndarray
    model_id: str = ""
    seed: int = 0
    replication_index: int = 0


@dataclass(frozen=True, eq=False)
class UniformPath:
    """U_i = Φ(X_i), with an ascending copy kept alongside."""

    values: np.ndarray
    sorted_view: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sorted_view", np.sort(v))

    def __len__(self):
        return self.values.size

    def prefix(self, n: int) -> "UniformPath":
        return UniformPath(self.values[:n])


def sample_path(factor: CholeskyFactor, master_seed: int, replication_index: int,
                model_id: str = "") -> GaussianPath:
    z = standard_normals(factor.n, master_seed, replication_index)
    return GaussianPath(factor.apply(z), model_id, int(master_seed), int(replication_index))


def sample_block(factor: CholeskyFactor, master_seed: int,
                 indices: Sequence[int]) -> np.ndarray:
    """X for several replications at once, shape (n, len(indices)).

    Column j uses the same normals as ``sample_path(factor, seed, indices[j])``;
    results agree with the single-path call up to BLAS rounding.
    """
    z = np.empty((factor.n, len(indices)))
    for j, idx in enumerate(indices):
        z[:, j] = standard_normals(factor.n, master_seed, idx)
    return factor.apply(z)


def normal_cdf(x) -> np.ndarray:
    """Φ(x) = erfc(-x/√2)/2, accurate in both tails."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def uniformize(path: GaussianPath | np.ndarray) -> UniformPath:
    x = path.values if isinstance(path, GaussianPath) else np.asarray(path, dtype=float)
    # keep U strictly inside (0, 1) where Φ rounds to an endpoint (|x| > ~8.3)
    return UniformPath(np.clip(normal_cdf(x), _U_LO, _U_HI))


def save_paths_csv(path, rows) -> None:
    """One replication per line."""
    arr = np.atleast_2d(np.asarray([getattr(r, "values", r) for r in rows], dtype=float))
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")
