"""AMIS and AIS run drivers.

Both schemes share the same loop: sample a batch from the current proposal,
add it to the archive, refit the proposal on the whole weighted archive.
They differ only in the weights the archive hands back: deterministic
mixture weights for AMIS, own-generation weights for AIS.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .adaptation import EmOptions, icl_select, moment_match, weighted_em
from .archive import MIXTURE, STANDARD, ParticleArchive, ProposalRecord
from .distributions import LogisticProductParams, standard_logistic_draws
from .exceptions import AmisError
from .initialization import (NelderMeadOptions, maximize_ess, rescale, rescaled_logpdf,
                             unit_logpdf)

log = logging.getLogger(__name__)

SCHEMES = ("amis", "ais")
FAMILIES = ("student-t", "gaussian-mixture")
INIT_MODES = ("ess", "user", "prior")


def default_batch_size(p: int) -> int:
    """Per-iteration batch size interpolated between 25 (p <= 2) and 500 (p >= 20)."""
    if p <= 2:
        return 25
    if p >= 20:
        return 500
    return int(round(25 + (500 - 25) * (p - 2) / 18))


@dataclass(frozen=True)
class RunConfig:
    """Definition of one AMIS or AIS run.

    ``nt`` is either one batch size used for every iteration or the full
    sequence ``N_1..N_T``; ``None`` picks :func:`default_batch_size`.
    ``init_mode`` is ``"ess"`` (logistic product rescaled to maximize the
    ESS, search started at ``init_scales``), ``"user"`` (``init_proposal``, or
    a logistic product with ``init_scales``) or ``"prior"`` (the target's
    ``prior`` attribute).
    """

    scheme: str = "amis"
    family: str = "student-t"
    n0: int = 1000
    nt: int | Sequence[int] | None = None
    t: int = 10
    seed: int = 0
    replication: int = 0
    init_mode: str = "ess"
    init_scales: Sequence[float] | None = None
    init_proposal: Any = None
    ess_threshold: float | None = None
    k_min: int = 1
    k_max: int = 6
    k: int | None = None
    em: EmOptions = field(default_factory=EmOptions)
    # EM settings for t >= 1, warm-started from the previous mixture
    refit_em: EmOptions = field(default_factory=lambda: EmOptions(restarts=0))
    nelder_mead: NelderMeadOptions = field(default_factory=NelderMeadOptions)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.n0 < 1:
            raise ValueError("n0 must be at least 1")
        if self.nt is not None and not np.isscalar(self.nt):
            if len(self.nt) != self.t:
                raise ValueError(f"nt lists {len(self.nt)} batch sizes but t={self.t}")
        if any(n < 1 for n in self._explicit_sizes()):
            raise ValueError("batch sizes must be at least 1")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("need 1 <= k_min <= k_max")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be at least 1")
        if self.ess_threshold is not None and not self.ess_threshold > 0:
            raise ValueError("ess_threshold must be positive")

    def _explicit_sizes(self):
        if self.nt is None:
            return []
        return [self.nt] if np.isscalar(self.nt) else list(self.nt)

    def batch_sizes(self, p: int) -> list:
        """``[N_0, N_1, ..., N_T]``."""
        if self.nt is None:
            rest = [default_batch_size(p)] * self.t
        elif np.isscalar(self.nt):
            rest = [int(self.nt)] * self.t
        else:
            rest = [int(n) for n in self.nt]
        return [int(self.n0)] + rest


@dataclass
class IterationDiagnostics:
    iteration: int
    ess: float
    size: int
    proposal: Any
    mean: np.ndarray
    variance: np.ndarray


@dataclass
class RunResult:
    config: RunConfig
    archive: ParticleArchive
    diagnostics: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    termination: str = "completed"
    k: int | None = None
    error: str | None = None

    @property
    def ess(self) -> float:
        return self.diagnostics[-1].ess

    @property
    def ess_trace(self) -> np.ndarray:
        return np.array([d.ess for d in self.diagnostics])


class RunFailed(AmisError):
    """A run aborted; ``result`` holds the diagnostics collected so far."""

    def __init__(self, message, result: RunResult):
        super().__init__(message)
        self.result = result


def iteration_rngs(seed, replication: int, iteration: int, base_key=()):
    """Independent (sampling, adaptation) generators for one iteration of one replication."""
    seq = np.random.SeedSequence(seed, spawn_key=tuple(base_key) + (replication, iteration))
    sample_seq, adapt_seq = seq.spawn(2)
    return np.random.default_rng(sample_seq), np.random.default_rng(adapt_seq)


def _initial_batch(config, target, n0, rng, timings):
    """Draw generation 0; also returns its proposal log density when already known."""
    p = target.dim
    start = time.perf_counter()
    log_q = None
    if config.init_mode == "ess":
        base = standard_logistic_draws(n0, p, rng)
        _, q0, _ = maximize_ess(base, target, config.init_scales, config.nelder_mead)
        points = rescale(base, q0.scales)
        # same arithmetic as the ESS search, so the archive reproduces its ESS exactly
        log_q = rescaled_logpdf(unit_logpdf(base), q0.scales)
    elif config.init_mode == "user":
        if config.init_proposal is not None:
            q0 = config.init_proposal
        elif config.init_scales is not None:
            q0 = LogisticProductParams(config.init_scales)
        else:
            raise ValueError("init_mode 'user' needs init_proposal or init_scales")
        points = q0.sample(n0, rng)
    else:
        q0 = getattr(target, "prior", None)
        if q0 is None:
            raise ValueError("init_mode 'prior' needs a target with a prior attribute")
        points = q0.sample(n0, rng)
    timings["init"] = time.perf_counter() - start
    return q0, points, log_q


class _Adapter:
    def __init__(self, config: RunConfig):
        self.config = config
        self.k = config.k
        self.current = None

    def fit(self, snapshot, rng):
        cfg = self.config
        y, w = snapshot.points, snapshot.normalized_weights
        if cfg.family == "student-t":
            self.current = moment_match(y, w)
        elif self.current is None:
            if self.k is None:
                self.k, fit = icl_select(y, w, cfg.k_min, cfg.k_max, cfg.em, rng)
            else:
                fit = weighted_em(y, w, self.k, cfg.em, rng)
            self.current = fit.params
        else:
            fit = weighted_em(y, w, self.current.k, cfg.refit_em, rng, init=self.current)
            self.current = fit.params
        return self.current


def _record(result, iteration):
    archive = result.archive
    snap = archive.normalized_weights()
    w = snap.normalized
    y = archive.points
    mean = w @ y
    var = w @ (y * y) - mean * mean
    proposal = archive.proposals[-1].params
    result.diagnostics.append(
        IterationDiagnostics(iteration, archive.ess(), len(archive), proposal, mean, var))


def _run(config: RunConfig, target, rng=None) -> RunResult:
    p = target.dim
    sizes = config.batch_sizes(p)
    weighting = MIXTURE if config.scheme == "amis" else STANDARD
    archive = ParticleArchive(p, weighting)
    result = RunResult(config, archive)
    timings = {"init": 0.0, "sampling": 0.0, "weighting": 0.0, "adaptation": 0.0}
    result.timings = timings

    if rng is not None:
        root = rng.bit_generator.seed_seq
        seed, base_key = root.entropy, root.spawn_key
    else:
        seed, base_key = config.seed, ()

    def rngs(t):
        return iteration_rngs(seed, config.replication, t, base_key)

    adapter = _Adapter(config)
    proposal = None
    failed_last = False
    try:
        for t, n_t in enumerate(sizes):
            sample_rng, adapt_rng = rngs(t)
            log_q = None
            if t == 0:
                proposal, points, log_q = _initial_batch(config, target, n_t, sample_rng, timings)
            else:
                start = time.perf_counter()
                points = proposal.sample(n_t, sample_rng)
                timings["sampling"] += time.perf_counter() - start

            start = time.perf_counter()
            archive.add_batch(points, target.log_density(points), ProposalRecord(proposal, n_t, t),
                              log_q)
            _record(result, t)
            timings["weighting"] += time.perf_counter() - start
            log.debug("iteration %d: ESS %.1f over %d particles", t, result.ess, len(archive))

            if config.ess_threshold is not None and result.ess >= config.ess_threshold:
                result.termination = "ess_threshold"
                break
            if t == len(sizes) - 1:
                break

            start = time.perf_counter()
            try:
                proposal = adapter.fit(archive.snapshot(), adapt_rng)
                failed_last = False
            except AmisError as exc:
                # one retry batch from the previous proposal, then give up
                if failed_last or adapter.current is None:
                    raise
                log.warning("adaptation failed at iteration %d (%s); reusing previous proposal",
                            t, exc)
                failed_last = True
            timings["adaptation"] += time.perf_counter() - start
    except (AmisError, np.linalg.LinAlgError) as exc:
        result.termination = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
        result.k = adapter.k
        raise RunFailed(result.error, result) from exc

    result.k = adapter.k
    return result


def run_amis(config: RunConfig, target, rng=None) -> RunResult:
    """Adaptive multiple importance sampling.

    Iteration 0 draws ``N_0`` points from the initial proposal.  Each later
    iteration draws ``N_t`` points from the proposal fitted at the previous
    step, re-weights every particle in the archive against the mixture of all
    proposals so far, and refits the proposal on the whole weighted archive.

    The random streams come from ``config.seed`` (or from ``rng``'s seed
    sequence when one is given), one pair per (replication, iteration).
    """
    if config.scheme != "amis":
        config = _with_scheme(config, "amis")
    return _run(config, target, rng)


def run_ais(config: RunConfig, target, rng=None) -> RunResult:
    """Same loop as :func:`run_amis` with classical ``pi / q_t`` weights."""
    if config.scheme != "ais":
        config = _with_scheme(config, "ais")
    return _run(config, target, rng)


def run(config: RunConfig, target, rng=None) -> RunResult:
    return _run(config, target, rng)


def _with_scheme(config, scheme):
    return replace(config, scheme=scheme)


SUITE_NAMES = ("E_y1", "E_y2", "sum_E_rest", "V_y1", "V_y2", "sum_V_rest")


def estimate_suite(result) -> dict:
    """Mean and variance estimates for ``y1``, ``y2`` and the summed remaining coordinates.

    Accepts a :class:`RunResult` or a :class:`ParticleArchive`.
    """
    archive = result.archive if isinstance(result, RunResult) else result
    w = archive.normalized_weights().normalized
    y = archive.points
    mean = w @ y
    var = w @ (y * y) - mean * mean
    return _suite(mean, var)


def suite_truth(target) -> dict:
    moments = target.known_moments()
    if moments is None:
        raise ValueError("target has no closed-form moments")
    return _suite(*moments)


def _suite(mean, var):
    if mean.shape[0] < 2:
        raise ValueError("the estimate suite needs p >= 2")
    return {
        "E_y1": float(mean[0]),
        "E_y2": float(mean[1]),
        "sum_E_rest": float(np.sum(mean[2:])),
        "V_y1": float(var[0]),
        "V_y2": float(var[1]),
        "sum_V_rest": float(np.sum(var[2:])),
    }
