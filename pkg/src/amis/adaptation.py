"""Fitting proposal parameters to a weighted sample.

Two criteria are provided: moment matching for the Student-t proposal, and a
weighted EM maximizing ``sum_i w_i log q(y_i; theta)`` for Gaussian mixtures,
with the number of components picked by ICL.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import GaussianMixtureParams, SpdMatrix, StudentTParams, logsumexp_rows
from .exceptions import DegenerateCovarianceError, SelectionError, TooFewEffectivePointsError

MIN_COMPONENT_WEIGHT = 1e-10
MIN_ESS_PER_COMPONENT = 5


@dataclass(frozen=True)
class EmOptions:
    max_iter: int = 200
    tol: float = 1e-6
    restarts: int = 2
    # None means 1e-8 * trace(global covariance) / p
    ridge: float | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be non-negative")


@dataclass
class EmFit:
    params: GaussianMixtureParams
    loglik: float
    iterations: int
    converged: bool
    # weighted log-likelihood before each M-step, plus the final value
    trace: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.params.k


def _check_weighted(points, weights):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (points.shape[0],):
        raise ValueError("one weight per point is required")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and non-negative")
    total = weights.sum()
    if not total > 0:
        raise ValueError("weights sum to zero")
    return points, weights / total


def weighted_moments(points, weights):
    """Weighted mean and (1/sum w normalized) covariance."""
    points, w = _check_weighted(points, weights)
    mean = w @ points
    centered = points - mean
    cov = (centered * w[:, None]).T @ centered
    return mean, 0.5 * (cov + cov.T)


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def moment_match(points, weights) -> StudentTParams:
    """Student-t (3 dof) proposal with the weighted mean and covariance."""
    points, w = _check_weighted(points, weights)
    support = points[w > 0]
    if support.shape[0] < 2 or np.all(support == support[0]):
        raise DegenerateCovarianceError("need at least two distinct points with positive weight")
    mean, cov = weighted_moments(points, w)
    try:
        return StudentTParams(mean, SpdMatrix(cov))
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError(str(exc)) from exc


def free_parameters(k: int, p: int) -> int:
    return (k - 1) + k * p + k * p * (p + 1) // 2


def _kmeanspp(points, w, k, rng):
    """Weighted k-means++ seeding: first center ~ w, then ~ w * D^2."""
    centers = [points[rng.choice(len(w), p=w)]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        prob = w * d2
        total = prob.sum()
        if total <= 0:
            idx = rng.choice(len(w), p=w)
        else:
            idx = rng.choice(len(w), p=prob / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers)


def _run_em(points, w, rho, means, covs, opts, ridge):
    trace = []
    converged = False
    it = 0
    params = None
    while True:
        params = GaussianMixtureParams(rho, means, covs)
        logc = params.component_logpdfs(points)
        logq = logsumexp_rows(logc)
        ll = float(w @ logq)
        if trace and abs(ll - trace[-1]) < opts.tol:
            trace.append(ll)
            converged = True
            break
        trace.append(ll)
        if it >= opts.max_iter:
            break
        it += 1

        resp = np.exp(logc - logq[:, None]) * w[:, None]
        rho = resp.sum(axis=0)
        keep = rho >= MIN_COMPONENT_WEIGHT
        new_means, new_covs = [], []
        for j in np.flatnonzero(keep):
            mu = resp[:, j] @ points / rho[j]
            centered = points - mu
            cov = (centered * resp[:, j][:, None]).T @ centered / rho[j]
            cov = 0.5 * (cov + cov.T)
            if np.linalg.eigvalsh(cov)[0] < ridge:
                keep[j] = False
                continue
            new_means.append(mu)
            new_covs.append(cov)
        if not np.all(keep):
            if not new_means:
                raise DegenerateCovarianceError("every mixture component collapsed")
            warnings.warn(f"dropping {np.count_nonzero(~keep)} collapsed mixture "
                          f"component(s), continuing with k={len(new_means)}",
                          RuntimeWarning, stacklevel=3)
            # the model changed, so the likelihood sequence starts over
            trace = []
        rho = rho[keep] / rho[keep].sum()
        means = np.array(new_means)
        covs = new_covs
    return EmFit(params, trace[-1], it, converged, trace)


def weighted_em(points, weights, k: int, opts: EmOptions | None = None, rng=None,
                init: GaussianMixtureParams | None = None) -> EmFit:
    """Fit a ``k``-component Gaussian mixture to a weighted sample by EM.

    Parameters
    ----------
    points : (n, p) array
    weights : (n,) array
        Importance weights; normalized internally.
    k : int
        Number of components.
    opts : EmOptions
    rng : numpy.random.Generator
        Drives the k-means++ seeding.
    init : GaussianMixtureParams, optional
        Warm start, tried first; ``opts.restarts`` seeded starts follow it.
        Without it ``opts.restarts + 1`` seeded starts are run.

    Returns
    -------
    EmFit
        The start reaching the highest weighted log-likelihood.
    """
    opts = opts or EmOptions()
    if k < 1:
        raise ValueError("k must be at least 1")
    points, w = _check_weighted(points, weights)
    ess = effective_sample_size(w)
    if ess < MIN_ESS_PER_COMPONENT * k:
        raise TooFewEffectivePointsError(
            f"effective sample size {ess:.1f} is below {MIN_ESS_PER_COMPONENT} * k = "
            f"{MIN_ESS_PER_COMPONENT * k}")
    # zero-weight points cannot influence any step
    keep = w > 0
    points, w = points[keep], w[keep]
    p = points.shape[1]
    _, global_cov = weighted_moments(points, w)
    ridge = opts.ridge if opts.ridge is not None else 1e-8 * np.trace(global_cov) / p
    rng = rng if rng is not None else np.random.default_rng()

    starts = []
    if init is not None:
        if init.dim != p:
            raise ValueError("warm start has the wrong dimension")
        starts.append((init.weights, init.means, [c.matrix for c in init.covs]))
    for _ in range(opts.restarts + (0 if init is not None else 1)):
        means = _kmeanspp(points, w, k, rng)
        starts.append((np.full(k, 1.0 / k), means, [global_cov] * k))

    best = None
    for rho, means, covs in starts:
        fit = _run_em(points, w, rho, means, covs, opts, ridge)
        if best is None or fit.loglik > best.loglik:
            best = fit
    return best


def icl_score(points, weights, fit: EmFit) -> float:
    """Completed-likelihood criterion with the ESS standing in for the sample size."""
    points, w = _check_weighted(points, weights)
    n_eff = effective_sample_size(w)
    logc = fit.params.component_logpdfs(points)
    # hard MAP assignment picks the largest log(rho_j phi_j) per point
    completed = n_eff * float(w @ np.max(logc, axis=1))
    return completed - 0.5 * free_parameters(fit.k, points.shape[1]) * np.log(n_eff)


def icl_select(points, weights, k_min: int, k_max: int, opts: EmOptions | None = None,
               rng=None):
    """Fit every ``k`` in ``[k_min, k_max]`` and keep the best ICL (smallest k on ties).

    Each ``k`` gets its own generator spawned from ``rng`` up front, so the
    result does not depend on the order the fits run in.
    """
    if not 1 <= k_min <= k_max:
        raise ValueError("need 1 <= k_min <= k_max")
    rng = rng if rng is not None else np.random.default_rng()
    children = rng.spawn(k_max - k_min + 1)
    best = None
    errors = []
    for k, child in zip(range(k_min, k_max + 1), children):
        try:
            fit = weighted_em(points, weights, k, opts, child)
        except (TooFewEffectivePointsError, DegenerateCovarianceError) as exc:
            errors.append(f"k={k}: {exc}")
            continue
        score = icl_score(points, weights, fit)
        if best is None or score > best[0]:
            best = (score, fit)
    if best is None:
        raise SelectionError("no mixture size could be fitted; " + "; ".join(errors))
    return best[1].k, best[1]
