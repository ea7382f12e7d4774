"""Exception hierarchy shared by the numerical and symbolic engines."""


class HartogsSzegoError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(HartogsSzegoError, ValueError):
    """Invalid parameters or configuration values."""


class NonConvergent(HartogsSzegoError):
    """Quadrature refinement did not reach the requested tolerance."""


class EvaluationFailure(HartogsSzegoError):
    """The integrand raised or returned a non-finite value at an abscissa."""


class UnsupportedParams(HartogsSzegoError):
    """Weight parameters fall outside the exact symbolic ring."""


class StructureViolation(HartogsSzegoError):
    """A derivative numerator does not have the expected leading term."""


class ThresholdNotFound(HartogsSzegoError):
    """Tail-sign threshold search exceeded its cap."""


class LogConvexityViolation(HartogsSzegoError):
    """A computed moment table failed the Cauchy-Schwarz log-convexity test."""


class TruncationFailure(HartogsSzegoError):
    """A moment table is too short to certify a kernel tail bound."""


class DivergenceRisk(HartogsSzegoError):
    """A kernel series was requested outside its region of convergence."""


class TableUnderflow(HartogsSzegoError):
    """A projection needs moments that the supplied table does not contain."""


class CacheIntegrityError(HartogsSzegoError):
    """A persisted moment table failed its checksum or schema validation."""
