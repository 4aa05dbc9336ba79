"""Target densities: the banana benchmark, a Gaussian, and finite discrete targets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import SpdMatrix, _as_points, _unwrap, logpdf_gaussian


class TargetDensity:
    """Unnormalized log density on ``R^p``.

    Subclasses implement :meth:`log_density` on ``(n, p)`` arrays; ``-inf`` is
    a legal value.  :meth:`known_moments` returns ``(mean, marginal variances)``
    when they are available in closed form, ``None`` otherwise.
    """

    dim: int

    def log_density(self, y) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, y):
        pts, single = _as_points(y, self.dim)
        return _unwrap(self.log_density(pts), single)

    def known_moments(self):
        return None


@dataclass(frozen=True)
class BananaParams:
    p: int = 2
    sigma2: float = 100.0
    b: float = 0.03

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("banana target needs p >= 2")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")


def banana_logpdf(y, params: BananaParams):
    pts, single = _as_points(y, params.p)
    # the twist has unit Jacobian, so no correction term
    twisted = pts[:, 1] + params.b * (pts[:, 0] ** 2 - params.sigma2)
    rest = pts[:, 2:]
    sq = pts[:, 0] ** 2 / params.sigma2 + twisted ** 2 + np.einsum("ij,ij->i", rest, rest)
    out = -0.5 * (params.p * np.log(2 * np.pi) + np.log(params.sigma2) + sq)
    return _unwrap(out, single)


def banana_true_moments(params: BananaParams):
    mean = np.zeros(params.p)
    var = np.ones(params.p)
    var[0] = params.sigma2
    var[1] = 1.0 + 2.0 * params.b ** 2 * params.sigma2 ** 2
    return mean, var


def sample_banana(params: BananaParams, n, rng):
    """Exact draws via the generative transform ``y2 = x2 - b (x1^2 - sigma2)``."""
    x = rng.standard_normal((n, params.p))
    x[:, 0] *= np.sqrt(params.sigma2)
    x[:, 1] -= params.b * (x[:, 0] ** 2 - params.sigma2)
    return x


class Banana(TargetDensity):
    def __init__(self, p=2, sigma2=100.0, b=0.03):
        self.params = BananaParams(p, sigma2, b)
        self.dim = self.params.p

    def log_density(self, y):
        return banana_logpdf(y, self.params)

    def known_moments(self):
        return banana_true_moments(self.params)

    def sample(self, n, rng):
        return sample_banana(self.params, n, rng)


class Gaussian(TargetDensity):
    def __init__(self, mean, cov=None):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.dim = self.mean.shape[0]
        self.cov = SpdMatrix(np.eye(self.dim) if cov is None else cov)

    def log_density(self, y):
        return logpdf_gaussian(np.atleast_2d(y), self.mean, self.cov)

    def known_moments(self):
        return self.mean.copy(), np.diag(self.cov.matrix).copy()


class ScaledTarget(TargetDensity):
    """``c * pi(y)``: same target, different (unknown) normalizing constant."""

    def __init__(self, target: TargetDensity, c: float):
        if not c > 0:
            raise ValueError("scale must be positive")
        self.target = target
        self.dim = target.dim
        self.log_c = float(np.log(c))

    def log_density(self, y):
        return self.target.log_density(y) + self.log_c

    def known_moments(self):
        return self.target.known_moments()


class DiscreteTarget(TargetDensity):
    """Probability mass on finitely many support points.

    Points off the support get ``-inf``.  Matching is exact, which is what the
    enumeration checks need: proposals there are discrete on the same support.
    """

    def __init__(self, support, probabilities):
        support = np.asarray(support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        probs = np.asarray(probabilities, dtype=float)
        if probs.shape != (support.shape[0],):
            raise ValueError("one probability per support point is required")
        if not np.all(probs > 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be positive and sum to one")
        if len({tuple(row) for row in support}) != support.shape[0]:
            raise ValueError("support points must be distinct")
        self.support = support
        self.probabilities = probs
        self.dim = support.shape[1]
        self._index = {tuple(row): i for i, row in enumerate(support)}

    def index_of(self, y) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(y, dtype=float))
        return np.array([self._index.get(tuple(row), -1) for row in pts])

    def log_density(self, y):
        idx = self.index_of(y)
        out = np.full(idx.shape, -np.inf)
        on = idx >= 0
        out[on] = np.log(self.probabilities[idx[on]])
        return out

    def expectation(self, h):
        return self.probabilities @ np.asarray(h(self.support), dtype=float)

    def known_moments(self):
        mean = self.probabilities @ self.support
        var = self.probabilities @ (self.support - mean) ** 2
        return mean, var


def discrete_target(support, probabilities) -> DiscreteTarget:
    return DiscreteTarget(support, probabilities)


class DiscreteProposal:
    """Finite discrete distribution usable as a proposal record's ``params``."""

    def __init__(self, support, probabilities):
        self._target = DiscreteTarget(support, probabilities)
        self.support = self._target.support
        self.probabilities = self._target.probabilities
        self.dim = self._target.dim

    def logpdf(self, y):
        return self._target.log_density(y)

    def sample(self, n, rng):
        idx = rng.choice(len(self.probabilities), size=n, p=self.probabilities)
        return self.support[idx]


def make_target(name: str, p: int, **kwargs) -> TargetDensity:
    if name == "banana":
        return Banana(p=p, sigma2=kwargs.get("sigma2", 100.0), b=kwargs.get("b", 0.03))
    if name == "gaussian":
        return Gaussian(kwargs.get("mean", np.zeros(p)), kwargs.get("cov"))
    raise ValueError(f"unknown target {name!r}")
