"""Exception taxonomy shared by all tensorgda modules.

The CLI maps these onto exit-code classes: configuration/usage problems,
data/file problems, and numeric failures are kept distinguishable.
"""


class TensorGdaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TensorGdaError):
    """Shapes of the operands are inconsistent."""


class InvalidModeError(DimensionError):
    """A mode index is outside the valid range for the tensor."""


class NumericInputError(TensorGdaError):
    """An input contains NaN or infinite entries."""


class ConvergenceError(TensorGdaError):
    """An iterative numeric routine failed to converge."""


class SingularityError(TensorGdaError):
    """A matrix that must be positive definite is not; try a larger ridge."""


class DegenerateModeError(TensorGdaError):
    """All singular values along a mode are zero."""


class ConfigurationError(TensorGdaError):
    """A configuration value is invalid or inconsistent with the data."""


class DatasetError(TensorGdaError):
    """A dataset file or manifest cannot be used."""


class PgmParseError(DatasetError):
    """A PGM file is malformed.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.message = message
        self.offset = offset
