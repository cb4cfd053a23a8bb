"""Exception hierarchy. InputError maps to exit code 2, ComputationError to 3."""

from __future__ import annotations


class PwcetError(Exception):
    """Base class for every error raised by the package."""

    tag = "error"


# ── Input / validation ──────────────────────────────────────────────────────

class InputError(PwcetError, ValueError):
    tag = "input"


class EmptyInput(InputError):
    tag = "empty_input"


class NegativeValue(InputError):
    tag = "negative_value"


class NonFinite(InputError):
    tag = "non_finite"


class InvalidParameter(InputError):
    tag = "invalid_parameter"


class InvalidQuery(InputError):
    tag = "invalid_query"


class InvalidSpec(InputError):
    tag = "invalid_spec"


class TraceFormatError(InputError):
    tag = "trace_format"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# ── Numerical failures ──────────────────────────────────────────────────────

class ComputationError(PwcetError, RuntimeError):
    tag = "computation"


class EmptyAdmissibleSet(ComputationError):
    tag = "empty_admissible_set"


class BracketFailure(ComputationError):
    tag = "bracket_failure"
