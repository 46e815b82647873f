"""Static validation with symbolic column tracking.

Conservative and sound: a column reference is accepted only when the
tracker can prove the column is present, so any script that passes
validation cannot raise a no-such-column error at runtime. Transforms
whose output columns are not statically known (onehot, select_features)
shrink the proven-present set instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..ml_toolkit.models import _KNOWN_HYPERPARAMS
from ..ml_toolkit.metrics import CLASSIFICATION_METRICS, REGRESSION_METRICS
from .nodes import (
    ClipOutliersStmt,
    DropStmt,
    EvaluateStmt,
    ImputeStmt,
    OnehotStmt,
    PredictStmt,
    ProfileStmt,
    SaveStmt,
    ScaleStmt,
    Script,
    SelectFeaturesStmt,
    SpaceDim,
    SplitStmt,
    TrainStmt,
    TuneStmt,
)


@dataclass(frozen=True)
class StaticError:
    code: str
    line: int
    message: str

    def render(self) -> str:
        return f"line {self.line}: {self.code}: {self.message}"


@dataclass
class EnvSummary:
    """What validation knows about the execution environment."""

    tables: dict  # name -> list of column names
    models: dict  # name -> family

    @classmethod
    def of_env(cls, env) -> "EnvSummary":
        return cls(
            tables={n: t.column_names() for n, t in env.tables.items()},
            models={n: m.spec.family for n, m in env.models.items()},
        )


def _dim_errors(dim: SpaceDim, family: str, line: int) -> list[StaticError]:
    errs = []
    if dim.name not in _KNOWN_HYPERPARAMS[family]:
        errs.append(StaticError(
            "E_UNKNOWN_HYPERPARAM", line,
            f"{family} does not accept hyperparameter {dim.name!r}"))
    if dim.kind in ("uniform", "loguniform", "int"):
        if len(dim.args) != 2 or not all(
            isinstance(a, (int, float)) for a in dim.args
        ):
            errs.append(StaticError(
                "E_BAD_SPACE", line,
                f"{dim.kind} needs two numeric bounds"))
            return errs
        lo, hi = dim.args
        if not lo < hi:
            errs.append(StaticError(
                "E_BAD_SPACE", line, f"{dim.kind} needs lo < hi"))
        if dim.kind == "loguniform" and lo <= 0:
            errs.append(StaticError(
                "E_BAD_SPACE", line, "loguniform needs lo > 0"))
        if dim.kind == "int" and not all(isinstance(a, int) for a in dim.args):
            errs.append(StaticError(
                "E_BAD_SPACE", line, "int range needs integer bounds"))
    elif dim.kind == "choice" and not dim.args:
        errs.append(StaticError("E_BAD_SPACE", line, "choice needs values"))
    return errs


def validate(script: Script, summary: EnvSummary) -> list[StaticError]:
    """Check the script against the summary without executing anything.

    Returns the full error list; empty means valid.
    """
    errors: list[StaticError] = []
    # proven-present column sets per table; columns beyond the set may or
    # may not exist, so referencing them is rejected
    tables: dict[str, set] = {n: set(cols) for n, cols in summary.tables.items()}
    models: dict[str, str] = dict(summary.models)

    def table_known(name: str, line: int) -> bool:
        if name not in tables:
            errors.append(StaticError(
                "E_UNDEFINED_TABLE", line, f"table {name!r} is not defined"))
            return False
        return True

    def column_known(table: str, column: str, line: int) -> bool:
        if not table_known(table, line):
            return False
        if column not in tables[table]:
            errors.append(StaticError(
                "E_UNDEFINED_COLUMN", line,
                f"column {column!r} is not provably present in {table!r}"))
            return False
        return True

    def model_known(name: str, line: int) -> bool:
        if name not in models:
            errors.append(StaticError(
                "E_UNDEFINED_MODEL", line, f"model {name!r} is not defined"))
            return False
        return True

    def check_metric_vs_family(family: str, metric: str, line: int):
        # linear is always regression, logistic always classification;
        # baseline/tree depend on the target and are checked at runtime
        if family == "linear" and metric in CLASSIFICATION_METRICS:
            errors.append(StaticError(
                "E_METRIC_TASK_MISMATCH", line,
                f"metric {metric!r} needs a classification model, "
                f"{family} is regression"))
        if family == "logistic" and metric in REGRESSION_METRICS:
            errors.append(StaticError(
                "E_METRIC_TASK_MISMATCH", line,
                f"metric {metric!r} needs a regression model, "
                f"{family} is classification"))

    for stmt in script.statements:
        line = stmt.line
        if isinstance(stmt, ProfileStmt):
            table_known(stmt.table, line)
        elif isinstance(stmt, ImputeStmt):
            column_known(stmt.table, stmt.column, line)
        elif isinstance(stmt, ScaleStmt):
            column_known(stmt.table, stmt.column, line)
        elif isinstance(stmt, ClipOutliersStmt):
            column_known(stmt.table, stmt.column, line)
            if stmt.k is not None and stmt.k <= 0:
                errors.append(StaticError(
                    "E_BAD_LITERAL", line, "clip k must be positive"))
        elif isinstance(stmt, DropStmt):
            if column_known(stmt.table, stmt.column, line):
                tables[stmt.table] = tables[stmt.table] - {stmt.column}
        elif isinstance(stmt, OnehotStmt):
            if column_known(stmt.table, stmt.column, line):
                # output indicator names are data-dependent
                tables[stmt.table] = tables[stmt.table] - {stmt.column}
            if stmt.max_card is not None and stmt.max_card < 1:
                errors.append(StaticError(
                    "E_BAD_LITERAL", line, "max cardinality must be >= 1"))
        elif isinstance(stmt, SelectFeaturesStmt):
            if column_known(stmt.table, stmt.target, line):
                # survivors besides the target are data-dependent
                tables[stmt.table] = {stmt.target}
            if stmt.top_k < 1:
                errors.append(StaticError(
                    "E_BAD_LITERAL", line, "top k must be >= 1"))
        elif isinstance(stmt, SplitStmt):
            if table_known(stmt.table, line):
                cols = set(tables[stmt.table])
                tables[stmt.out1] = cols
                tables[stmt.out2] = set(cols)
            if not 0 < stmt.ratio < 1:
                errors.append(StaticError(
                    "E_BAD_LITERAL", line, "ratio must be in (0, 1)"))
        elif isinstance(stmt, TrainStmt):
            column_known(stmt.table, stmt.target, line)
            unknown = [k for k, _ in stmt.params
                       if k not in _KNOWN_HYPERPARAMS[stmt.family]]
            for k in unknown:
                errors.append(StaticError(
                    "E_UNKNOWN_HYPERPARAM", line,
                    f"{stmt.family} does not accept hyperparameter {k!r}"))
            models[stmt.out_name] = stmt.family
        elif isinstance(stmt, EvaluateStmt):
            if model_known(stmt.model, line):
                check_metric_vs_family(models[stmt.model], stmt.metric, line)
            table_known(stmt.table, line)
        elif isinstance(stmt, TuneStmt):
            column_known(stmt.table, stmt.target, line)
            check_metric_vs_family(stmt.family, stmt.metric, line)
            if stmt.budget < 1:
                errors.append(StaticError(
                    "E_BAD_LITERAL", line, "budget must be >= 1"))
            if stmt.cv is not None and stmt.cv < 2:
                errors.append(StaticError(
                    "E_BAD_LITERAL", line, "cv fold count must be >= 2"))
            for dim in stmt.space:
                errors.extend(_dim_errors(dim, stmt.family, line))
            models[stmt.out_name] = stmt.family
        elif isinstance(stmt, PredictStmt):
            model_known(stmt.model, line)
            table_known(stmt.table, line)
            tables[stmt.out_name] = {"id", "prediction"}
        elif isinstance(stmt, SaveStmt):
            table_known(stmt.name, line)
            if stmt.path.startswith("/") or ".." in stmt.path.split("/"):
                errors.append(StaticError(
                    "E_BAD_PATH", line,
                    "save path must be relative with no '..' segments"))
        else:  # pragma: no cover
            raise AssertionError(f"unhandled statement {stmt!r}")
    return errors
