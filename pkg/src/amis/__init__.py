"""Adaptive multiple importance sampling with deterministic-mixture reweighting."""
from .adaptation import EmFit, EmOptions, icl_select, moment_match, weighted_em
from .archive import ParticleArchive, ProposalRecord, WeightVector
from .distributions import (
    GaussianMixtureParams,
    LogisticProductParams,
    SpdMatrix,
    StudentTParams,
    logpdf_gaussian,
    logpdf_logistic_product,
    logpdf_student_t3,
    sample_gaussian,
    sample_logistic_product,
    sample_student_t3,
)
from .exceptions import (
    AmisError,
    DegenerateCovarianceError,
    DegenerateSampleError,
    InitializationError,
    SelectionError,
    TooFewEffectivePointsError,
)
from .initialization import NelderMeadOptions, ess_objective, initial_sample, maximize_ess, nelder_mead_maximize
from .schemes import RunConfig, RunFailed, RunResult, estimate_suite, run_ais, run_amis, suite_truth
from .targets import Banana, BananaParams, Gaussian, ScaledTarget, banana_logpdf, banana_true_moments, discrete_target

__version__ = "0.1.0"
