"""Exception and warning types shared across the toolkit.

The CLI maps these onto its exit codes: usage problems exit 1, ParseError
exits 2, DataError exits 3. Non-fatal diagnostics are emitted as
DiagnosticWarning through the standard warnings machinery.
"""

from __future__ import annotations


class EvaluationError(Exception):
    """Base class for all toolkit errors."""


class ParseError(EvaluationError):
    """A malformed input file or line (wrong field count, bad number, ...)."""

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}:"
        if line is not None:
            prefix += f"{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class DataError(EvaluationError):
    """Well-formed input that violates a data contract (duplicates, mismatched
    topic sets, out-of-range grades, missing pivot, ...)."""


class UsageError(EvaluationError):
    """Invalid configuration or command usage (unknown measure, undeclared
    environment reference, ...)."""


class DiagnosticWarning(UserWarning):
    """Non-fatal diagnostic: empty topic intersections, truncated rankings,
    duplicate-but-consistent judgments."""
