"""
Error types for the FAE toolkit

Argument, config and parse problems map to CLI exit code 2;
anything derived from NumericalError maps to exit code 3.
"""
from typing import Optional


class FaeError(Exception):
    """Base class for every error raised by the toolkit."""


class ArgumentError(FaeError, ValueError):
    """Invalid argument: wrong shape, ordering, or size."""


class DomainError(ArgumentError):
    """Time point outside a basis domain (no extrapolation)."""


class DataParseError(ArgumentError):
    """Malformed row in a long-format CSV."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateFitError(ArgumentError):
    """Classifier asked to fit fewer than two classes."""


class ConfigError(FaeError, ValueError):
    """Configuration values that cannot work together."""


class StateError(FaeError, RuntimeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class UnsupportedOperationError(FaeError):
    """Request the model family cannot honor (e.g. AE off-grid evaluation)."""


class NumericalError(FaeError, ArithmeticError):
    """Base for numerical failures."""


class TrainingFailure(NumericalError):
    """Loss or gradient became NaN/Inf during training."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)


class EvaluationError(NumericalError):
    """Non-finite intermediate value in a forward pass."""

    def __init__(self, message: str, layer: Optional[str] = None):
        self.layer = layer
        if layer is not None:
            message = f"{layer}: {message}"
        super().__init__(message)


class SingularityError(NumericalError):
    """Rank-deficient system with no regularization to fall back on."""
