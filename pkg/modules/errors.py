"""
Exception hierarchy shared by the library and the command line.
Each class carries the process exit code the CLI uses for it.
"""
import logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFICATION = 3


class ViganError(Exception):
    """Base class for all errors raised by this package."""
    exit_code = EXIT_USAGE


class UsageError(ViganError):
    """Invalid arguments or configuration."""
    exit_code = EXIT_USAGE


class DataError(ViganError):
    """Malformed, inconsistent or missing data."""
    exit_code = EXIT_DATA


class DimensionError(DataError):
    """Widths or shapes that do not agree."""


class ShapeError(DimensionError):
    """Raised by tensor operations; the message names both shapes."""

    def __init__(self, op: str, shape_a, shape_b=None, detail: str=''):
        self.op = op
        self.shape_a = tuple(shape_a) if shape_a is not None else None
        self.shape_b = tuple(shape_b) if shape_b is not None else None
        message = f'{op}: incompatible shapes {self.shape_a}'
        if shape_b is not None:
            message += f' and {self.shape_b}'
        if detail:
            message += f' ({detail})'
        super().__init__(message)


class EmptyBatchError(DataError):
    """A loss was asked to average over zero examples."""


class EmptyPoolError(DataError):
    """Sampling was requested from a pool that holds no examples."""


class GraphError(ViganError):
    """Misuse of a computation graph (no active graph, non-scalar backward, ...)."""


class DomainError(ViganError):
    """An operation received input outside its mathematical domain (e.g. log of 0)."""


class NonFiniteGradientError(ViganError):
    """A gradient or value became NaN or infinite."""

    def __init__(self, name: str, message: str=''):
        self.name = name
        super().__init__(message or f'non-finite gradient for parameter {name}')


class UntrainedModelError(ViganError):
    """Imputation requested from a model that has never been trained."""


class ModelFormatError(DataError):
    """A model file is not a valid VIGM file."""


class JobTimeoutError(ViganError):
    """A concurrent job did not finish within the batch timeout."""


class VerificationError(ViganError):
    """Gradient check or acceptance verification failed."""
    exit_code = EXIT_VERIFICATION


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the process exit code.

    Args:
        error: Exception raised by a subcommand

    Returns:
        int: Exit code (1 usage, 2 data, 3 verification)
    """
    if isinstance(error, ViganError):
        return error.exit_code
    return EXIT_USAGE
