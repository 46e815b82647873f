"""Error types shared across the toolkit.

Every failure carries a stable machine-readable code (the ``E_*`` constants
used in diagnostics, observations, and journal payloads) plus a human
message.
"""

from __future__ import annotations


class DuetError(Exception):
    """Base error with a stable code string."""

    code = "E_INTERNAL"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    @property
    def message(self) -> str:
        return str(self)

    def __repr__(self) -> str:  # pragma: no cover
        return f"{type(self).__name__}({self.code}: {self})"


# react_core
class ReactMalformed(DuetError):
    code = "E_REACT_MALFORMED"


class NoTools(DuetError):
    code = "E_NO_TOOLS"


class TraceFinalized(DuetError):
    code = "E_TRACE_FINALIZED"


# llm_backend
class HttpError(DuetError):
    code = "E_HTTP"

    def __init__(self, status: int, body_snippet: str):
        super().__init__(f"HTTP {status}: {body_snippet}")
        self.status = status
        self.body_snippet = body_snippet


class TimeoutError_(DuetError):
    code = "E_TIMEOUT"


class FixtureExhausted(DuetError):
    code = "E_FIXTURE_EXHAUSTED"


class FixtureMismatch(DuetError):
    code = "E_FIXTURE_MISMATCH"

    def __init__(self, expected: str, got_snippet: str):
        super().__init__(f"expected substring {expected!r}, got: {got_snippet!r}")
        self.expected = expected
        self.got_snippet = got_snippet


class CacheMiss(DuetError):
    code = "E_CACHE_MISS"


# data_toolkit
class CsvSyntax(DuetError):
    code = "E_CSV_SYNTAX"


class RaggedRow(DuetError):
    code = "E_RAGGED_ROW"


class EmptyInput(DuetError):
    code = "E_EMPTY"


class DupHeader(DuetError):
    code = "E_DUP_HEADER"


class NoSuchColumn(DuetError):
    code = "E_NO_SUCH_COLUMN"


class TypeMismatch(DuetError):
    code = "E_TYPE_MISMATCH"


class AllMissing(DuetError):
    code = "E_ALL_MISSING"


class HasMissing(DuetError):
    code = "E_HAS_MISSING"


class TooFewRows(DuetError):
    code = "E_TOO_FEW_ROWS"


class NoNumericFeatures(DuetError):
    code = "E_NO_NUMERIC_FEATURES"


# ml_toolkit
class Unprepared(DuetError):
    code = "E_UNPREPARED"


class UnknownHyperparam(DuetError):
    code = "E_UNKNOWN_HYPERPARAM"


class Singular(DuetError):
    code = "E_SINGULAR"


class SchemaMismatch(DuetError):
    code = "E_SCHEMA_MISMATCH"


class LengthMismatch(DuetError):
    code = "E_LENGTH_MISMATCH"


class Degenerate(DuetError):
    code = "E_DEGENERATE"


class BadConfig(DuetError):
    code = "E_BAD_CONFIG"


# pipeline_dsl
class DslSyntax(DuetError):
    code = "E_DSL_SYNTAX"

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class BudgetExceeded(DuetError):
    code = "E_BUDGET"


class RuntimeFailure(DuetError):
    code = "E_RUNTIME"

    def __init__(self, line: int, underlying_code: str, message: str):
        super().__init__(f"line {line}: {underlying_code}: {message}")
        self.line = line
        self.underlying_code = underlying_code


# agents
class StepBudget(DuetError):
    code = "E_STEP_BUDGET"


class RepairExhausted(DuetError):
    code = "E_REPAIR_EXHAUSTED"


class NoModel(DuetError):
    code = "E_NO_MODEL"


class NoTestTable(DuetError):
    code = "E_NO_TEST_TABLE"


# session_service
class SessionNotFound(DuetError):
    code = "E_SESSION_NOT_FOUND"


class QueueFull(DuetError):
    code = "E_QUEUE_FULL"


class Capacity(DuetError):
    code = "E_CAPACITY"


class NotFound(DuetError):
    code = "E_NOT_FOUND"


class TooLarge(DuetError):
    code = "E_TOO_LARGE"
