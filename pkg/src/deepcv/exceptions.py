"""Custom exceptions for deep Chan-Vese segmentation."""

from __future__ import annotations

from pathlib import Path

from .types import JSONObject


class DeepCVError(Exception):
    """Base exception for segmentation errors."""

    pass


class InvalidInputError(DeepCVError, ValueError):
    """Input failed validation (bad shape, range, parameter or mode)."""

    pass


class DimensionMismatchError(InvalidInputError):
    """Two inputs that must agree in shape or dimension do not."""

    def __init__(self, what: str, expected: object, actual: object) -> None:
        """Initialize DimensionMismatchError.

        Args:
            what: Name of the mismatching quantity
            expected: Expected value
            actual: Value that was received
        """
        super().__init__(f"{what} mismatch: expected {expected}, got {actual}")
        self.expected: object = expected
        self.actual: object = actual


class EmptyRegionError(InvalidInputError):
    """A region of an initial mask is empty, so its statistics are undefined."""

    def __init__(self, region: str, hint: str) -> None:
        """Initialize EmptyRegionError.

        Args:
            region: Which region is empty ("foreground" or "background")
            hint: Remediation hint shown to the user
        """
        super().__init__(f"Initial {region} region is empty. {hint}")
        self.region: str = region
        self.hint: str = hint


class ImageIOError(DeepCVError, OSError):
    """A raster, mask or checkpoint file could not be read or written."""

    def __init__(self, path: Path, reason: str) -> None:
        """Initialize ImageIOError.

        Args:
            path: Offending file path
            reason: Underlying failure description
        """
        super().__init__(f"{path}: {reason}")
        self.path: Path = path


class NumericalAbortError(DeepCVError):
    """Optimization produced non-finite gradients or parameters."""

    def __init__(self, iteration: int, diagnostics: JSONObject) -> None:
        """Initialize NumericalAbortError.

        Args:
            iteration: Iteration at which the failure was detected
            diagnostics: JSON-serializable dump of the solver state
        """
        super().__init__(f"Non-finite values at iteration {iteration}: {diagnostics}")
        self.iteration: int = iteration
        self.diagnostics: JSONObject = diagnostics
