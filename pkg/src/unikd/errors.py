"""Exception types raised by the distillation engine.

Everything derives from UnikdError so callers can catch engine failures
without swallowing programming errors; built-in exceptions (IndexError,
TypeError) are still used where Python convention expects them.
"""


class UnikdError(Exception):
    """Base class for all engine-specific errors."""


class ZeroNormError(UnikdError):
    """A vector that must be normalized has norm below the safe floor."""


class DimensionMismatchError(UnikdError):
    """Operands disagree on a dimension that must match."""


class EmptyBatchError(UnikdError):
    """A batch operation received zero rows."""


class EmptyMatrixError(UnikdError):
    """A matrix operation received zero rows or zero columns."""


class DegenerateTripletError(UnikdError):
    """Triplet angle undefined: two of the three points (nearly) coincide."""


class BankNotReadyError(UnikdError):
    """Relational loss requested before the memory bank filled to capacity."""


class BankEmptyError(UnikdError):
    """Snapshot requested from a bank that has never been written."""


class BatchTooLargeError(UnikdError):
    """Enqueued batch has more rows than the bank's total capacity."""


class NonFiniteError(UnikdError):
    """A NaN or infinity appeared where finite values are required."""


class StaleCacheError(UnikdError):
    """Backward pass received activations from a superseded forward pass."""


class LabelOutOfRangeError(UnikdError):
    """A class label falls outside [0, classes)."""


class DivergenceError(UnikdError):
    """Training produced a non-finite loss or parameter."""


class ConfigError(UnikdError):
    """Config file is malformed, has unknown keys, or fails validation."""


class InsufficientNegativesError(UnikdError):
    """Too few negative pairs to resolve the requested false-accept target."""


class RangeError(UnikdError):
    """Requested curve range is empty or outside the loss's domain."""
