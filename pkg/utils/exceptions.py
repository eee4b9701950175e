# utils/exceptions.py

"""
Custom Exceptions
Defines the exception hierarchy for the eye-biomarker-study package.
"""

from typing import Iterable, Optional, Union
from pathlib import Path


class StudyError(Exception):
    """Base exception for study errors"""

    def __init__(self, message="Study error occurred"):
        self.message = message
        super().__init__(self.message)


class ValidationError(StudyError):
    """Exception for invalid values and violated preconditions"""

    def __init__(self, message="Validation error occurred"):
        super().__init__(message)


class IngestionError(ValidationError):
    """Exception for malformed input rows, located by file and line"""

    def __init__(
        self,
        message="Malformed input row",
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(f"{location}{message}")


class DegenerateLabelError(ValidationError):
    """Exception for label sets with a single class"""

    def __init__(self, message="degenerate label set"):
        super().__init__(message)


class DegenerateComparisonError(StudyError):
    """Exception when a paired comparison has zero variance"""

    def __init__(self, message="degenerate comparison"):
        super().__init__(message)


class InsufficientCasesError(StudyError):
    """Exception when an evaluation set has too few positives or negatives"""

    def __init__(self, target: str = "", n_pos: int = 0, n_neg: int = 0, message=None):
        self.target = target
        self.n_pos = n_pos
        self.n_neg = n_neg
        if message is None:
            message = f"insufficient cases for {target}: {n_pos} positives, {n_neg} negatives"
        super().__init__(message)


class SeparationError(StudyError):
    """Exception when a maximum-likelihood fit has no finite optimum"""

    def __init__(self, message="quasi-separation detected"):
        super().__init__(message)


class CollinearityError(StudyError):
    """Exception for a singular information matrix"""

    def __init__(self, columns: Iterable[str] = (), message=None):
        self.columns = list(columns)
        if message is None:
            message = f"singular information matrix; collinear columns: {', '.join(self.columns)}"
        super().__init__(message)


class ExportError(StudyError):
    """Exception for export-related errors"""

    def __init__(self, message="Export error occurred"):
        super().__init__(message)


class DataNotFoundError(StudyError):
    """Exception when data is not found"""

    def __init__(self, message="Data not found"):
        super().__init__(message)


class ConfigurationError(StudyError):
    """Exception for configuration errors"""

    def __init__(self, message="Configuration error occurred"):
        super().__init__(message)
