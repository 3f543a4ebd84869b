"""
Exception types raised by pyqkernel.

Every exception derives from a builtin so callers may catch either the
specific type or the builtin (``ValueError``, ``ArithmeticError``).
"""

from __future__ import annotations


class DimensionError(ValueError):
    """Raised when an array has an unsupported size or mismatched shape."""


class NumericError(ArithmeticError):
    """Raised when a quantity needed for a computation is not usable (e.g. zero trace)."""


class DegenerateProblemError(ValueError):
    """Raised when an SVM training problem contains a single class."""


class PipelineError(ValueError):
    """Raised when a preprocessing stage leaves no data behind.

    Parameters
    ----------
    stage : str
        Name of the stage that failed.
    message : str
        Human readable description.
    """

    def __init__(self, stage: str, message: str) -> None:
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class ConfigError(ValueError):
    """Raised for malformed run configurations.

    Parameters
    ----------
    message : str
        Human readable description.
    field : str, optional
        ``GROUP.key`` of the offending entry.
    line : int, optional
        1-based line number of the entry in the config file, when known.
    """

    def __init__(
        self, message: str, field: str | None = None, line: int | None = None
    ) -> None:
        self.field = field
        self.line = line
        location = ""
        if field is not None:
            location = f"{field}"
            if line is not None:
                location += f" (line {line})"
            location += ": "
        super().__init__(f"{location}{message}")
