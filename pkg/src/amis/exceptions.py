"""Exception hierarchy shared by the sampler modules."""


class AmisError(Exception):
    """Base class for sampler failures."""


class DegenerateSampleError(AmisError):
    """Every particle has zero weight: the proposals missed the target support."""


class DegenerateCovarianceError(AmisError):
    """Too few distinct weighted points to estimate a covariance."""


class TooFewEffectivePointsError(AmisError):
    pass


class SelectionError(AmisError):
    pass


class InitializationError(AmisError):
    pass
