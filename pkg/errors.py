#!/usr/bin/env python3
"""
scoreshape - Exception Hierarchy

Every error raised by the library derives from ScoreshapeError and from the
builtin exception a caller would naturally expect (ValueError for bad data,
IndexError for out-of-range requests, ArithmeticError for numeric failures).
Code that only knows the builtins keeps working; the CLI catches
ScoreshapeError to map failures onto exit code 1.
"""

from typing import Any, Dict, Optional

__version__ = "1.0.0"


class ScoreshapeError(Exception):
    """Base class for all scoreshape errors."""


# ============================================================================
# DATA INGESTION ERRORS
# ============================================================================

class SchemaError(ScoreshapeError, ValueError):
    """A column schema is inconsistent with itself or with a file header."""

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column


class ParseError(ScoreshapeError, ValueError):
    """A CSV cell could not be parsed as the kind its column declares."""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"{message} (row {row}, column '{column}')")
        self.row = row
        self.column = column


class DomainError(ScoreshapeError, ValueError):
    """A value lies outside the domain an operation accepts."""


# ============================================================================
# SHAPE AND PARAMETER ERRORS
# ============================================================================

class DimensionError(ScoreshapeError, ValueError):
    """Two inputs that must agree in length or width do not."""


class RangeError(ScoreshapeError, IndexError):
    """A requested index (boosting round, replication) is out of range."""


class ParameterError(ScoreshapeError, ValueError):
    """A hyperparameter or option is invalid for the data it is applied to."""


class CollinearityError(ScoreshapeError, ValueError):
    """The logistic design matrix is rank deficient."""

    def __init__(self, message: str, column: str):
        super().__init__(message)
        self.column = column


# ============================================================================
# NUMERIC AND WORKFLOW ERRORS
# ============================================================================

class NumericError(ScoreshapeError, ArithmeticError):
    """A numeric procedure produced a non-finite or unbounded result."""


class ResamplingError(ScoreshapeError, RuntimeError):
    """A rejection resampler could not reach its target."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ReplicationError(ScoreshapeError, RuntimeError):
    """A study replication failed; carries the index and seed to replay it."""

    def __init__(self, message: str, index: int, seed: int):
        super().__init__(f"replication {index} (seed {seed}) failed: {message}")
        self.index = index
        self.seed = seed
