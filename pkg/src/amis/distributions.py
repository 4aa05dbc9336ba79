"""Densities and samplers for the proposal families.

Everything works on ``(n, p)`` arrays of points; a single ``(p,)`` point is
accepted too and gives a scalar back.  Densities are always returned on the
log scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.special import gammaln

LOG_2PI = np.log(2.0 * np.pi)
T_DOF = 3


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a covariance cannot be factorized even after jitter."""


def _as_points(y, p):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = np.atleast_2d(y)
    if pts.ndim != 2 or pts.shape[1] != p:
        raise ValueError(f"expected points of dimension {p}, got shape {y.shape}")
    return pts, single


def _unwrap(values, single):
    return float(values[0]) if single else values


def logsumexp_rows(a: np.ndarray) -> np.ndarray:
    """``log(sum(exp(a), axis=1))`` for a finite-or--inf 2-D array."""
    m = np.max(a, axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return m + np.log(np.sum(np.exp(a - m[:, None]), axis=1))


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive definite matrix with a cached Cholesky factor.

    If the first factorization fails, a ridge of ``1e-8 * trace / p`` is added
    to the diagonal and the factorization is retried once.
    """

    matrix: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)
    logdet: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, ndmin=2)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("covariance has non-finite entries")
        scale = max(np.max(np.abs(m)), np.finfo(float).tiny)
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        m = 0.5 * (m + m.T)
        try:
            chol = linalg.cholesky(m, lower=True)
        except linalg.LinAlgError:
            p = m.shape[0]
            m = m + np.eye(p) * 1e-8 * np.trace(m) / p
            try:
                chol = linalg.cholesky(m, lower=True)
            except linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(
                    "covariance is not positive definite") from exc
        if not np.all(np.diag(chol) > 0):
            raise NotPositiveDefiniteError("covariance is not positive definite")
        m.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "chol", chol)
        object.__setattr__(self, "logdet", 2.0 * float(np.sum(np.log(np.diag(chol)))))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def mahalanobis_sq(self, centered: np.ndarray) -> np.ndarray:
        """Squared Mahalanobis norms of the rows of ``centered``."""
        z = linalg.solve_triangular(self.chol, centered.T, lower=True)
        return np.sum(z * z, axis=0)

    @cached_property
    def inv_chol(self) -> np.ndarray:
        return linalg.solve_triangular(self.chol, np.eye(self.dim), lower=True)

    def mahalanobis_sq_fast(self, centered: np.ndarray) -> np.ndarray:
        """Same as :meth:`mahalanobis_sq` through a cached inverse factor.

        A matrix product instead of a triangular solve; several times faster
        on large batches, accurate to a few ulps times the condition number.
        """
        z = centered @ self.inv_chol.T
        return np.einsum("ij,ij->i", z, z)


def as_spd(cov) -> SpdMatrix:
    return cov if isinstance(cov, SpdMatrix) else SpdMatrix(cov)


@dataclass(frozen=True)
class StudentTParams:
    """Multivariate t with 3 degrees of freedom, location ``mean``, scale ``cov``."""

    mean: np.ndarray
    cov: SpdMatrix
    dof: int = T_DOF

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = as_spd(self.cov)
        if self.dof != T_DOF:
            raise ValueError("degrees of freedom are fixed at 3")
        if mean.shape != (cov.dim,):
            raise ValueError("mean and scale matrix dimensions differ")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, y):
        return logpdf_student_t3(y, self)

    def sample(self, n, rng):
        return sample_student_t3(self, n, rng)


@dataclass(frozen=True)
class GaussianMixtureParams:
    weights: np.ndarray
    means: np.ndarray
    covs: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = tuple(as_spd(c) for c in self.covs)
        k = w.shape[0]
        if means.shape[0] != k or len(covs) != k:
            raise ValueError("mixture weights, means and covariances disagree on k")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to one")
        p = means.shape[1]
        if any(c.dim != p for c in covs):
            raise ValueError("component dimensions disagree")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_logpdfs(self, y) -> np.ndarray:
        """``(n, k)`` array of ``log rho_j + log phi(y_i; mu_j, Sigma_j)``."""
        pts, _ = _as_points(y, self.dim)
        out = np.empty((pts.shape[0], self.k))
        for j, cov in enumerate(self.covs):
            maha = cov.mahalanobis_sq_fast(pts - self.means[j])
            out[:, j] = np.log(self.weights[j]) - 0.5 * (cov.dim * LOG_2PI + cov.logdet + maha)
        return out

    def logpdf(self, y):
        pts, single = _as_points(y, self.dim)
        return _unwrap(logsumexp_rows(self.component_logpdfs(pts)), single)

    def sample(self, n, rng):
        return sample_gaussian_mixture(self, n, rng)


@dataclass(frozen=True)
class LogisticProductParams:
    scales: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.scales, dtype=float))
        if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("logistic scales must be finite and strictly positive")
        object.__setattr__(self, "scales", s)

    @property
    def dim(self) -> int:
        return self.scales.shape[0]

    def logpdf(self, y):
        return logpdf_logistic_product(y, self)

    def sample(self, n, rng):
        return sample_logistic_product(self, n, rng)


def logpdf_gaussian(y, mean, cov):
    """Log density of ``N(mean, cov)`` evaluated at the rows of ``y``."""
    cov = as_spd(cov)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if mean.shape != (cov.dim,):
        raise ValueError("mean and covariance dimensions differ")
    pts, single = _as_points(y, cov.dim)
    maha = cov.mahalanobis_sq(pts - mean)
    out = -0.5 * (cov.dim * LOG_2PI + cov.logdet + maha)
    return _unwrap(out, single)


def logpdf_student_t3(y, params: StudentTParams):
    p = params.dim
    nu = float(params.dof)
    pts, single = _as_points(y, p)
    maha = params.cov.mahalanobis_sq(pts - params.mean)
    const = (gammaln(0.5 * (nu + p)) - gammaln(0.5 * nu)
             - 0.5 * p * np.log(nu * np.pi) - 0.5 * params.cov.logdet)
    out = const - 0.5 * (nu + p) * np.log1p(maha / nu)
    return _unwrap(out, single)


def logpdf_logistic_product(y, params: LogisticProductParams):
    s = params.scales
    pts, single = _as_points(y, s.shape[0])
    z = pts / s
    # z - 2 log(1 + e^z) rewritten through |z| so e^z never overflows
    az = np.abs(z)
    out = np.sum(-az - 2.0 * np.log1p(np.exp(-az)) - np.log(s), axis=1)
    return _unwrap(out, single)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n}")
    return int(n)


def sample_gaussian(mean, cov, n, rng):
    cov = as_spd(cov)
    n = _check_n(n)
    z = rng.standard_normal((n, cov.dim))
    return np.asarray(mean, dtype=float) + z @ cov.chol.T


def sample_student_t3(params: StudentTParams, n, rng):
    """Draw ``mean + L z / sqrt(w / nu)`` with ``z`` Gaussian and ``w ~ chi2(nu)``."""
    n = _check_n(n)
    z = rng.standard_normal((n, params.dim))
    w = rng.chisquare(params.dof, size=n)
    return params.mean + (z @ params.cov.chol.T) / np.sqrt(w / params.dof)[:, None]


def sample_gaussian_mixture(params: GaussianMixtureParams, n, rng):
    n = _check_n(n)
    labels = rng.choice(params.k, size=n, p=params.weights)
    z = rng.standard_normal((n, params.dim))
    out = np.empty_like(z)
    for j in range(params.k):
        idx = labels == j
        out[idx] = params.means[j] + z[idx] @ params.covs[j].chol.T
    return out


def standard_logistic_draws(n, p, rng):
    return rng.logistic(size=(_check_n(n), p))


def sample_logistic_product(params: LogisticProductParams, n, rng):
    return standard_logistic_draws(n, params.dim, rng) * params.scales
