"""Exception types shared across the package.

Every error raised on purpose derives from :class:`MrpcError`. The three
intermediate classes group errors by the CLI exit code they map to.
"""


class MrpcError(Exception):
    """Base class for all package errors."""


class ConfigError(MrpcError, ValueError):
    """Invalid parameters, shapes or incompatible inputs (exit code 2)."""


class NumericalError(MrpcError, ArithmeticError):
    """A numerical routine could not produce a valid result (exit code 4)."""


class DataFileError(MrpcError):
    """A dataset or projector file could not be read or written (exit code 3)."""


# configuration / shape errors
class DimensionMismatch(ConfigError):
    pass


class KindMismatch(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class SpecMismatch(ConfigError):
    pass


class InvalidSize(ConfigError):
    pass


class InvalidKernel(ConfigError):
    pass


class EmptyInput(ConfigError):
    pass


class TooFewPoints(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class ImageTooSmall(ConfigError):
    pass


class TooFewFrames(ConfigError):
    pass


# numerical errors
class NonSymmetric(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DegenerateSpectrum(NumericalError):
    pass


# file errors
class IoError(DataFileError):
    pass


class SchemaError(DataFileError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantViolation(DataFileError):
    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index
