"""Exception and warning types shared across the package."""


class SpcaldaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(SpcaldaError):
    """Input data or parameters violate a documented precondition."""


class DimensionGuard(SpcaldaError):
    """A dense p x p computation was requested above the materialization guard."""


class DimensionMismatch(SpcaldaError):
    """Feature dimensions of the inputs do not agree."""


class SingularWithinEstimate(SpcaldaError):
    """The chosen within-class covariance estimate is numerically singular."""


class GapTooSmall(SpcaldaError):
    """The eigenvalue gap at the requested spectral split is below tolerance."""


class PreconditionViolated(SpcaldaError):
    """A verifier was called on inputs that do not satisfy its hypothesis."""


class VerificationError(SpcaldaError):
    """A verifier's internal consistency assertion failed."""


class ParseError(SpcaldaError):
    """A data file could not be parsed; the message names the location."""


class ConfigError(SpcaldaError):
    """Command-line or run configuration is invalid."""


class RankDeficiencyWarning(UserWarning):
    """Requested more directions than the numerical rank supports."""


class DegenerateModelWarning(UserWarning):
    """The fitted model has no discriminative directions."""
