"""
Error hierarchy for bayes-cancel.

Every error carries the CLI exit code it maps to:
  2 -> usage / config
  3 -> data (and model-shape problems caused by data)
  4 -> sampler
  5 -> comparison mismatch
"""

from __future__ import annotations

from typing import Any


class BayesCancelError(Exception):
    """Base class for all domain errors."""

    exit_code: int = 1


class ConfigError(BayesCancelError):
    exit_code = 2


class DataError(BayesCancelError):
    exit_code = 3


class FileFormatError(DataError):
    """The data file is empty or is not UTF-8 text."""


class SchemaError(DataError):
    """A required CSV column is missing."""

    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"missing column: '{column}'")


class ParseError(DataError):
    """A cell could not be parsed; addressed by 1-based data row and column name."""

    def __init__(self, row: int, column: str, value: str, expected: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column '{column}': cannot parse {value!r} as {expected}")


class MissingValueError(DataError):
    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column '{column}': empty cell")


class EncodingError(DataError):
    def __init__(self, column: str, level: str):
        self.column = column
        self.level = level
        super().__init__(f"column '{column}': level '{level}' is not in the frozen encoding plan")


class LabelError(DataError):
    pass


class SizeError(DataError):
    pass


class DesignError(DataError):
    pass


class ModelError(BayesCancelError):
    exit_code = 3


class ShapeError(ModelError, ValueError):
    pass


class FamilyMismatchError(ModelError):
    pass


class DomainError(BayesCancelError, ValueError):
    """Argument outside the domain of a special function."""

    exit_code = 3


class SamplerError(BayesCancelError):
    exit_code = 4


class InitializationError(SamplerError):
    pass


class DivergenceError(SamplerError):
    def __init__(self, message: str, payload: dict[str, Any]):
        self.payload = payload
        super().__init__(message)


class ComparisonError(BayesCancelError):
    exit_code = 5
