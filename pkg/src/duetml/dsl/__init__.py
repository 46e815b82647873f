from .docs import dsl_reference
from .interp import (
    ERROR_HINTS,
    Env,
    ExecReport,
    Limits,
    StmtOutcome,
    TUNE_SEED,
    execute,
    render_observation,
)
from .nodes import Script, render_source
from .parser import parse
from .validator import EnvSummary, StaticError, validate

__all__ = [
    "ERROR_HINTS", "Env", "ExecReport", "Limits", "StmtOutcome", "TUNE_SEED",
    "execute", "render_observation", "Script", "render_source", "parse",
    "EnvSummary", "StaticError", "validate", "dsl_reference",
]
