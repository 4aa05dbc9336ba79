"""Pooled particle archive with deterministic-mixture reweighting.

Every particle ever simulated is kept.  For particle ``y`` the archive keeps
the accumulator ``delta(y) = sum_l N_l q_l(y)`` over all proposals registered
so far (on the log scale), so that its mixture weight is

    omega(y) = pi(y) / (delta(y) / M),      M = sum_l N_l.

Registering a new proposal ``q_t`` with batch size ``N_t`` adds ``N_t q_t(y)``
to the accumulator of every past particle and computes the full sum for the
new ones.  The pseudo-code often quoted for this update adds ``q_t(y)`` without
the ``N_t`` factor; that only agrees with the pooled mixture when all batch
sizes are equal, so the factor is always applied here.

The classical weights ``pi(y) / q_l(y)`` (own generation only) are tracked too,
so the same archive can report either weighting.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .exceptions import DegenerateSampleError

MIXTURE = "mixture"
STANDARD = "standard"


@dataclass(frozen=True)
class ProposalRecord:
    """One generation's proposal and the number of particles drawn from it.

    ``params`` is any object exposing ``logpdf(points)`` and
    ``sample(n, rng)``; in practice one of the parameter classes of
    :mod:`amis.distributions`.
    """

    params: Any
    n: int
    generation: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"batch size must be a positive integer, got {self.n}")

    def logpdf(self, y) -> np.ndarray:
        return np.asarray(self.params.logpdf(y), dtype=float)


@dataclass(frozen=True)
class WeightVector:
    log_weights: np.ndarray
    normalized: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_weights)


@dataclass(frozen=True)
class WeightedSample:
    """Read-only snapshot of the archive between two mutations."""

    points: np.ndarray
    generation: np.ndarray
    log_pi: np.ndarray
    weights: WeightVector

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.weights.normalized


class ParticleArchive:
    """Growing pooled sample ``{(y_i, pi(y_i), delta_i)}`` and its proposals.

    Parameters
    ----------
    dim : int
        Dimension of the particles.
    weighting : {"mixture", "standard"}
        Default weighting used by :meth:`normalized_weights`, :meth:`estimate`
        and :meth:`ess`.  ``"mixture"`` gives the deterministic multiple
        mixture weights, ``"standard"`` the classical ``pi / q_own`` ones.
    """

    def __init__(self, dim: int, weighting: str = MIXTURE):
        if weighting not in (MIXTURE, STANDARD):
            raise ValueError(f"unknown weighting {weighting!r}")
        self.dim = int(dim)
        self.weighting = weighting
        self.proposals: list[ProposalRecord] = []
        self._points = np.empty((0, self.dim))
        self._log_pi = np.empty(0)
        self._log_delta = np.empty(0)
        self._log_own = np.empty(0)
        self._generation = np.empty(0, dtype=int)

    def __len__(self):
        return self._points.shape[0]

    @property
    def size(self) -> int:
        return len(self)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def log_pi(self) -> np.ndarray:
        return self._log_pi

    @property
    def log_delta(self) -> np.ndarray:
        return self._log_delta

    @property
    def log_own(self) -> np.ndarray:
        """``log q_l(y)`` under the proposal that generated each particle."""
        return self._log_own

    @property
    def generation(self) -> np.ndarray:
        return self._generation

    def add_batch(self, points, log_pi_values, proposal: ProposalRecord,
                  log_q=None) -> "ParticleArchive":
        """Append one generation and update every particle's mixture denominator.

        ``log_q`` optionally supplies the new proposal's log density at
        ``points`` when the caller has already computed it.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        log_pi_values = np.atleast_1d(np.asarray(log_pi_values, dtype=float))
        if points.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {points.shape[1]}")
        if points.shape[0] != proposal.n or log_pi_values.shape != (proposal.n,):
            raise ValueError(
                f"batch holds {points.shape[0]} points and {log_pi_values.shape[0]} "
                f"target values but the proposal declares N={proposal.n}")
        if proposal.generation != len(self.proposals):
            raise ValueError(
                f"expected generation {len(self.proposals)}, got {proposal.generation}")
        if np.any(np.isnan(log_pi_values)) or np.any(log_pi_values == np.inf):
            raise ValueError("log target values must be finite or -inf")

        log_n = np.log(proposal.n)
        if len(self):
            self._log_delta = np.logaddexp(self._log_delta, log_n + proposal.logpdf(self._points))

        # new particles: sum over every registered proposal, the new one included
        if log_q is None:
            log_own = proposal.logpdf(points)
        else:
            log_own = np.asarray(log_q, dtype=float)
            if log_own.shape != (proposal.n,):
                raise ValueError("log_q needs one value per new point")
        terms = [np.log(rec.n) + rec.logpdf(points) for rec in self.proposals]
        terms.append(log_n + log_own)
        new_delta = terms[0]
        for term in terms[1:]:
            new_delta = np.logaddexp(new_delta, term)

        self.proposals.append(proposal)
        self._points = np.vstack([self._points, points])
        self._log_pi = np.concatenate([self._log_pi, log_pi_values])
        self._log_delta = np.concatenate([self._log_delta, new_delta])
        self._log_own = np.concatenate([self._log_own, log_own])
        self._generation = np.concatenate(
            [self._generation, np.full(proposal.n, proposal.generation)])
        return self

    def log_mixture_density(self) -> np.ndarray:
        """``log((1/M) sum_l N_l q_l(y))`` for every particle."""
        if len(self.proposals) == 1:
            # mixture of one component is the proposal itself
            return self._log_own
        return self._log_delta - np.log(len(self))

    def log_weights(self, weighting: str | None = None) -> np.ndarray:
        weighting = weighting or self.weighting
        if weighting == MIXTURE:
            denom = self.log_mixture_density()
        elif weighting == STANDARD:
            denom = self._log_own
        else:
            raise ValueError(f"unknown weighting {weighting!r}")
        return self._log_pi - denom

    def normalized_weights(self, weighting: str | None = None) -> WeightVector:
        lw = self.log_weights(weighting)
        return WeightVector(lw, normalize_log_weights(lw))

    def snapshot(self, weighting: str | None = None) -> WeightedSample:
        return WeightedSample(self._points.copy(), self._generation.copy(),
                              self._log_pi.copy(), self.normalized_weights(weighting))

    def estimate(self, h: Callable[[np.ndarray], np.ndarray], weighting: str | None = None):
        """Self-normalized estimate of ``E[h(y)]``.

        ``h`` is applied to the whole ``(M, p)`` array of points and must
        return an ``(M,)`` or ``(M, d)`` array.
        """
        w = self.normalized_weights(weighting).normalized
        return weighted_mean(w, h(self._points))

    def ess(self, weighting: str | None = None) -> float:
        return ess_from_log_weights(self.log_weights(weighting))

    def to_csv(self, path, weighting: str | None = None):
        w = self.normalized_weights(weighting).normalized
        header = (["generation"] + [f"y{j + 1}" for j in range(self.dim)]
                  + ["log_pi", "log_delta", "weight"])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i in range(len(self)):
                writer.writerow([int(self._generation[i])]
                                + [repr(float(v)) for v in self._points[i]]
                                + [repr(float(self._log_pi[i])), repr(float(self._log_delta[i])),
                                   repr(float(w[i]))])


def normalize_log_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegenerateSampleError("all importance weights are zero")
    w = np.exp(lw - np.max(lw))
    return w / np.sum(w)


def weighted_mean(normalized_weights, values):
    return np.asarray(normalized_weights) @ np.asarray(values, dtype=float)


def ess_from_log_weights(log_weights) -> float:
    """``(sum w)^2 / sum w^2``, which equals ``N / (1 + cv^2)`` of the weights."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegenerateSampleError("all importance weights are zero")
    w = np.exp(lw - np.max(lw))
    return float(np.sum(w) ** 2 / np.sum(w * w))
