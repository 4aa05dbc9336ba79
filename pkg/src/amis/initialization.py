"""Initial proposal: a product of logistics rescaled to maximize the ESS.

One sample ``z`` of standard logistic draws is simulated once; a scale
vector ``s`` maps it to ``y = s * z``, the weights ``pi(y) / q_s(y)`` are
computed and the ESS of those weights is maximized over ``s`` with a
Nelder-Mead simplex run in ``log s`` coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import ess_from_log_weights
from .distributions import LogisticProductParams, logpdf_logistic_product, standard_logistic_draws
from .exceptions import InitializationError


@dataclass(frozen=True)
class NelderMeadOptions:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    # None means 500 * dimension
    max_evals: int | None = None
    tol: float = 1e-6
    step: float = 0.25

    def __post_init__(self):
        if not self.reflection > 0:
            raise ValueError("reflection coefficient must be positive")
        if not self.expansion > 1:
            raise ValueError("expansion coefficient must exceed 1")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction coefficient must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink coefficient must lie in (0, 1)")
        if not self.step > 0 or not self.tol > 0:
            raise ValueError("step and tol must be positive")
        if self.max_evals is not None and self.max_evals < 1:
            raise ValueError("max_evals must be positive")


@dataclass(frozen=True)
class InitialSample:
    """Standard logistic base draws and the scales currently applied to them."""

    base: np.ndarray
    scales: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return rescale(self.base, self.scales)

    @property
    def proposal(self) -> LogisticProductParams:
        return LogisticProductParams(self.scales)


def rescale(base, scales):
    return np.asarray(base) * np.asarray(scales)


def initial_sample(n0: int, p: int, rng) -> InitialSample:
    return InitialSample(standard_logistic_draws(n0, p, rng), np.ones(p))


def unit_logpdf(base_draws) -> np.ndarray:
    """Log density of the unit-scale logistic product at the base draws."""
    base_draws = np.atleast_2d(base_draws)
    return logpdf_logistic_product(base_draws, LogisticProductParams(np.ones(base_draws.shape[1])))


def rescaled_logpdf(base_logpdf, scales) -> np.ndarray:
    """Log density of the rescaled proposal at ``scales * z``, from the unit density at ``z``."""
    return base_logpdf - np.sum(np.log(scales))


def ess_objective(scales, base_draws, target, base_logpdf=None) -> float:
    """ESS of ``pi(y) / q_s(y)`` on ``y = scales * base_draws``; 0 when every weight vanishes.

    ``q_s(s * z) = q_1(z) / prod(s)``, so the unit-scale density of the base
    draws can be passed in as ``base_logpdf`` and reused across calls.
    """
    params = LogisticProductParams(scales)
    y = rescale(base_draws, params.scales)
    if base_logpdf is None:
        base_logpdf = unit_logpdf(base_draws)
    log_w = target.log_density(y) - rescaled_logpdf(base_logpdf, params.scales)
    log_w = np.where(np.isnan(log_w), -np.inf, log_w)
    if not np.any(np.isfinite(log_w)):
        return 0.0
    return ess_from_log_weights(log_w)


def nelder_mead_maximize(f, x0, opts: NelderMeadOptions | None = None, trace=None):
    """Maximize ``f`` over the positive orthant with a Nelder-Mead simplex.

    The simplex lives in ``u = log x``.  Non-finite objective values are
    treated as the worst possible value.  If ``trace`` is a list, the best
    vertex value is appended to it after every iteration.

    Returns
    -------
    (x, fx) : tuple
        Best vertex found and its objective value.
    """
    opts = opts or NelderMeadOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if np.any(x0 <= 0):
        raise ValueError("starting point must be strictly positive")
    n = x0.shape[0]
    max_evals = opts.max_evals or 500 * n
    nfev = 0

    def g(u):
        nonlocal nfev
        nfev += 1
        val = f(np.exp(u))
        return -val if np.isfinite(val) else np.inf

    u0 = np.log(x0)
    g0 = g(u0)
    if not np.isfinite(g0):
        raise ValueError("objective is not finite at the starting point")

    simplex = np.vstack([u0, u0 + opts.step * np.eye(n)])
    values = np.array([g0] + [g(v) for v in simplex[1:]])

    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if trace is not None:
            trace.append(-values[0])
        spread = values[-1] - values[0]
        if spread <= opts.tol * abs(values[0]) + 1e-12 or nfev >= max_evals:
            break

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + opts.reflection * (centroid - worst)
        gr = g(xr)
        if gr < values[0]:
            xe = centroid + opts.expansion * (xr - centroid)
            ge = g(xe)
            if ge < gr:
                simplex[-1], values[-1] = xe, ge
            else:
                simplex[-1], values[-1] = xr, gr
        elif gr < values[-2]:
            simplex[-1], values[-1] = xr, gr
        else:
            if gr < values[-1]:
                xc = centroid + opts.contraction * (xr - centroid)
                gc = g(xc)
                accept = gc <= gr
            else:
                xc = centroid + opts.contraction * (worst - centroid)
                gc = g(xc)
                accept = gc < values[-1]
            if accept:
                simplex[-1], values[-1] = xc, gc
            else:
                best = simplex[0]
                for i in range(1, n + 1):
                    simplex[i] = best + opts.shrink * (simplex[i] - best)
                    values[i] = g(simplex[i])

    return np.exp(simplex[0]), -values[0]


def maximize_ess(base_draws, target, init_scales=None, opts: NelderMeadOptions | None = None):
    """Rescale the logistic base sample to maximize the ESS against ``target``.

    Returns
    -------
    scales : (p,) array
    proposal : LogisticProductParams
        The rescaled initial proposal.
    ess : float
        ESS achieved on ``base_draws``.
    """
    base_draws = np.atleast_2d(np.asarray(base_draws, dtype=float))
    p = base_draws.shape[1]
    x0 = np.ones(p) if init_scales is None else np.asarray(init_scales, dtype=float)
    base_logpdf = unit_logpdf(base_draws)
    scales, ess = nelder_mead_maximize(
        lambda s: ess_objective(s, base_draws, target, base_logpdf), x0, opts)
    if not ess > 0:
        raise InitializationError("no scale vector put any weight on the target support")
    return scales, LogisticProductParams(scales), ess
