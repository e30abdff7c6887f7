"""Exception types raised across the package."""


class PiscoError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(PiscoError, ValueError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class SingularSystem(PiscoError, ArithmeticError):
    """Normal matrix of a least-squares system could not be factorized."""


class TooFewSamples(PiscoError, ValueError):
    pass


class EvenKernel(PiscoError, ValueError):
    pass


class AcsTooSmall(PiscoError, ValueError):
    pass


class NonFiniteLoss(PiscoError, FloatingPointError):
    pass


class NdaError(PiscoError, IOError):
    """Malformed array file."""


class BadMagic(NdaError):
    pass


class TruncatedPayload(NdaError):
    pass


class UnknownDtype(NdaError):
    pass


class ConfigError(PiscoError, ValueError):
    pass
