"""Exception types raised across the package."""


class ParextError(Exception):
    """Base class for all package errors."""


class NonPowerOfTwo(ParextError, ValueError):
    pass


class NonFiniteSample(ParextError, ValueError):
    def __init__(self, message, coordinates=None):
        super().__init__(message)
        self.coordinates = coordinates


class GridMismatch(ParextError, ValueError):
    pass


class SingularEvaluation(ParextError, ValueError):
    pass


class RhoExceedsQuadRange(ParextError, ValueError):
    pass


class ConvexityMismatch(ParextError, ValueError):
    pass


class KTooLarge(ParextError, ValueError):
    pass


class ZeroImage(ParextError, ArithmeticError):
    pass


class ZeroField(ParextError, ValueError):
    pass


class NonFinite(ParextError, ArithmeticError):
    pass


class EmptyRegion(ParextError, ValueError):
    pass


class DegenerateDenominator(ParextError, ArithmeticError):
    pass


class ConfigError(ParextError, ValueError):
    """Configuration problem; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class RangeViolation(ConfigError):
    pass
