"""Exception types raised by the numerical routines."""


class ArtifactError(Exception):
    """Base class for all package errors."""


class PointwiseUndefined(ArtifactError):
    pass


class NonIntegrable(ArtifactError):
    pass


class OriginSingularity(ArtifactError):
    pass


class LightConeSingularity(ArtifactError):
    pass


class QuadratureFailure(ArtifactError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class OrderTooLarge(ArtifactError):
    pass


class DimensionMismatch(ArtifactError):
    pass


class NotPSD(ArtifactError):
    pass


class Divergent(ArtifactError):
    pass


class BudgetExceeded(ArtifactError):
    def __init__(self, message, best_effort=None):
        super().__init__(message)
        self.best_effort = best_effort


class InvalidPairing(ArtifactError):
    pass


class ExpOverflow(ArtifactError):
    pass


class NotNormalized(ArtifactError):
    pass


class Stalled(ArtifactError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class HypothesisViolated(ArtifactError):
    pass


class ConfigError(ArtifactError):
    pass
