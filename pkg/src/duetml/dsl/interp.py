"""Transactional interpreter for pipeline scripts.

Statements run against a working copy of the environment; any runtime
error returns the original environment unchanged with the error recorded
as the report's last entry. Tables and models are immutable values, so the
working copy is just fresh dicts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .. import data_toolkit as dt
from ..clock import Clock, SystemClock
from ..errors import BudgetExceeded, DuetError
from ..ml_toolkit import (
    DIRECTION,
    Choice,
    IntRange,
    LogUniform,
    ModelSpec,
    SearchSpace,
    Uniform,
    kfold_cv,
    metric as score_metric,
    predict as ml_predict,
    random_search,
    successive_halving,
    train as ml_train,
)
from ..rng import shuffled_indices
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
    SplitStmt,
    TrainStmt,
    TuneStmt,
)

#: fixed seed for tune-statement subsampling/CV so scripts are reproducible
TUNE_SEED = 1234

DEFAULT_MAX_SECONDS = 300.0
DEFAULT_MAX_CELLS = 10_000_000


@dataclass
class Limits:
    max_seconds: float = DEFAULT_MAX_SECONDS
    max_cells: int = DEFAULT_MAX_CELLS


@dataclass
class Env:
    tables: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    last_results: list = field(default_factory=list)
    budget_used: float = 0.0

    def copy(self) -> "Env":
        return Env(dict(self.tables), dict(self.models),
                   list(self.last_results), self.budget_used)

    def summary_text(self) -> str:
        lines = []
        for name, t in self.tables.items():
            cols = ", ".join(
                f"{c.name}({c.ctype.value})" for c in t.columns[:12]
            )
            more = "" if len(t.columns) <= 12 else f", +{len(t.columns) - 12} more"
            lines.append(f"table {name}: {t.n_rows} rows, "
                         f"{len(t.columns)} cols [{cols}{more}]")
        for name, m in self.models.items():
            lines.append(f"model {name}: {m.spec.family} task={m.task} "
                         f"target={m.target}")
        if not lines:
            lines.append("(empty environment)")
        return "\n".join(lines)


@dataclass(frozen=True)
class StmtOutcome:
    line: int
    rendered: str
    ok: bool
    result: str = ""
    code: str = ""
    message: str = ""
    extra: dict = field(default_factory=dict)  # e.g. tune trial scores


@dataclass
class ExecReport:
    entries: list  # of StmtOutcome; at most one error, and it is last
    elapsed: float = 0.0
    version_delta: dict = field(default_factory=dict)  # table -> new version

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def error(self) -> StmtOutcome | None:
        return None if self.ok else self.entries[-1]

    def to_json(self) -> dict:
        # elapsed is wall-clock noise; deliberately excluded so identical
        # runs journal identically
        return {
            "ok": self.ok,
            "entries": [
                {
                    "line": e.line, "stmt": e.rendered, "ok": e.ok,
                    "result": e.result, "code": e.code, "message": e.message,
                    **({"extra": e.extra} if e.extra else {}),
                }
                for e in self.entries
            ],
            "version_delta": dict(self.version_delta),
        }


ERROR_HINTS = {
    "E_DSL_SYNTAX": "fix the statement syntax; use read_docs for the grammar",
    "E_UNDEFINED_TABLE": "tables must exist or be created earlier in the script",
    "E_UNDEFINED_MODEL": "train or tune a model before referencing it",
    "E_UNDEFINED_COLUMN": "check column names against the profile",
    "E_NO_SUCH_COLUMN": "check column names against the profile",
    "E_TYPE_MISMATCH": "this operation requires a different column type",
    "E_HAS_MISSING": "impute the column before scaling or clipping",
    "E_ALL_MISSING": "use constant imputation for fully missing columns",
    "E_UNPREPARED": "features must be numeric with no missing values; "
                    "impute and onehot first",
    "E_UNKNOWN_HYPERPARAM": "use read_docs train to see valid hyperparameters",
    "E_METRIC_TASK_MISMATCH": "pick a metric that matches the model task",
    "E_SCHEMA_MISMATCH": "apply the same transforms as the training table",
    "E_SINGULAR": "use a positive l2 penalty",
    "E_TOO_FEW_ROWS": "not enough rows for this split or fold count",
    "E_DEGENERATE": "this metric needs both classes present",
    "E_BAD_CONFIG": "halving needs budget >= 2",
    "E_BAD_LITERAL": "a numeric argument is out of range",
    "E_BAD_PATH": "save paths must be relative without '..'",
    "E_NAME_TAKEN": "split outputs cannot overwrite existing tables",
    "E_BUDGET": "reduce the data size, budget, or script cost",
}


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def _build_space(stmt: TuneStmt) -> SearchSpace:
    dims = {}
    for d in stmt.space:
        if d.kind == "uniform":
            dims[d.name] = Uniform(float(d.args[0]), float(d.args[1]))
        elif d.kind == "loguniform":
            dims[d.name] = LogUniform(float(d.args[0]), float(d.args[1]))
        elif d.kind == "int":
            dims[d.name] = IntRange(int(d.args[0]), int(d.args[1]))
        else:
            dims[d.name] = Choice(tuple(d.args))
    return SearchSpace(stmt.family, dims)


class _Executor:
    def __init__(self, env: Env, limits: Limits, artifact_dir,
                 default_strategy: str):
        self.env = env
        self.limits = limits
        self.artifact_dir = Path(artifact_dir) if artifact_dir else None
        self.default_strategy = default_strategy
        self.last_extra: dict = {}

    def run(self, stmt) -> str:
        self.last_extra = {}
        handler = getattr(self, "_do_" + type(stmt).__name__)
        return handler(stmt)

    def _table(self, name: str) -> dt.Table:
        if name not in self.env.tables:
            raise DuetError(f"table {name!r} is not defined",
                            code="E_UNDEFINED_TABLE")
        return self.env.tables[name]

    def _model(self, name: str):
        if name not in self.env.models:
            raise DuetError(f"model {name!r} is not defined",
                            code="E_UNDEFINED_MODEL")
        return self.env.models[name]

    def _do_ProfileStmt(self, stmt: ProfileStmt) -> str:
        t = self._table(stmt.table)
        missing = sum(c.missing_count() for c in t.columns)
        return (f"profile {stmt.table}: rows={t.n_rows} "
                f"cols={len(t.columns)} missing_cells={missing}")

    def _do_ImputeStmt(self, stmt: ImputeStmt) -> str:
        t = self._table(stmt.table)
        before = t.column(stmt.column).missing_count()
        self.env.tables[stmt.table] = dt.impute(
            t, stmt.column, stmt.strategy, constant=stmt.constant
        )
        return (f"impute {stmt.table}.{stmt.column} with {stmt.strategy}: "
                f"filled {before} missing")

    def _do_OnehotStmt(self, stmt: OnehotStmt) -> str:
        t = self._table(stmt.table)
        max_card = stmt.max_card if stmt.max_card is not None else 32
        out = dt.onehot(t, stmt.column, max_card=max_card)
        self.env.tables[stmt.table] = out
        added = len(out.columns) - len(t.columns) + 1
        return f"onehot {stmt.table}.{stmt.column}: {added} indicator columns"

    def _do_ScaleStmt(self, stmt: ScaleStmt) -> str:
        t = self._table(stmt.table)
        self.env.tables[stmt.table] = dt.scale(t, stmt.column, stmt.kind)
        return f"scale {stmt.table}.{stmt.column} {stmt.kind}: ok"

    def _do_ClipOutliersStmt(self, stmt: ClipOutliersStmt) -> str:
        t = self._table(stmt.table)
        k = stmt.k if stmt.k is not None else 1.5
        out = dt.clip_outliers(t, stmt.column, stmt.method, k=k)
        changed = sum(
            1 for a, b in zip(t.column(stmt.column).values,
                              out.column(stmt.column).values)
            if a != b
        )
        self.env.tables[stmt.table] = out
        return (f"clip_outliers {stmt.table}.{stmt.column} {stmt.method}: "
                f"{changed} values clipped")

    def _do_DropStmt(self, stmt: DropStmt) -> str:
        t = self._table(stmt.table)
        self.env.tables[stmt.table] = dt.drop(t, stmt.column)
        return f"drop {stmt.table}.{stmt.column}: ok"

    def _do_SelectFeaturesStmt(self, stmt: SelectFeaturesStmt) -> str:
        t = self._table(stmt.table)
        out = dt.select_features(t, stmt.target, stmt.top_k)
        self.env.tables[stmt.table] = out
        kept = [c.name for c in out.columns]
        return f"select_features {stmt.table}: kept {', '.join(kept)}"

    def _do_SplitStmt(self, stmt: SplitStmt) -> str:
        t = self._table(stmt.table)
        for out in (stmt.out1, stmt.out2):
            if out in self.env.tables and out != stmt.table:
                raise DuetError(
                    f"table {out!r} already exists; split cannot overwrite it",
                    code="E_NAME_TAKEN")
        a, b = dt.split(t, stmt.ratio, stmt.seed, names=(stmt.out1, stmt.out2))
        self.env.tables[stmt.out1] = a
        self.env.tables[stmt.out2] = b
        return (f"split {stmt.table} -> {stmt.out1}({a.n_rows}), "
                f"{stmt.out2}({b.n_rows})")

    def _do_TrainStmt(self, stmt: TrainStmt) -> str:
        t = self._table(stmt.table)
        spec = ModelSpec(stmt.family, dict(stmt.params))
        model = ml_train(spec, t, stmt.target)
        self.env.models[stmt.out_name] = model
        return (f"model {stmt.out_name}: {stmt.family} on {stmt.table} "
                f"n={t.n_rows} task={model.task}")

    def _do_EvaluateStmt(self, stmt: EvaluateStmt) -> str:
        t = self._table(stmt.table)
        model = self._model(stmt.model)
        preds = ml_predict(model, t)
        truth = list(t.column(model.target).values)
        value = score_metric(stmt.metric, truth, preds)
        return f"{stmt.metric}={_fmt(value)} n={t.n_rows}"

    def _do_TuneStmt(self, stmt: TuneStmt) -> str:
        t = self._table(stmt.table)
        space = _build_space(stmt)
        direction = DIRECTION[stmt.metric]
        strategy = stmt.strategy or self.default_strategy
        perm = shuffled_indices(t.n_rows, TUNE_SEED).tolist()

        def evaluate_at(spec: ModelSpec, fraction: float = 1.0) -> float:
            take = max(2, math.ceil(fraction * t.n_rows))
            sub = dt._take_rows(t, perm[:take], f"{t.name}_sub")
            if stmt.cv is not None:
                mean, _, _ = kfold_cv(spec, sub, stmt.target, stmt.cv,
                                      stmt.metric, TUNE_SEED)
                return mean
            from ..ml_toolkit import holdout_score

            return holdout_score(spec, sub, stmt.target, stmt.metric,
                                 TUNE_SEED)

        if strategy == "random":
            result = random_search(space, stmt.budget, evaluate_at, TUNE_SEED,
                                   stmt.metric, direction)
        else:
            result = successive_halving(space, stmt.budget, evaluate_at,
                                        TUNE_SEED, stmt.metric, direction)
        model = ml_train(result.best, t, stmt.target)
        self.env.models[stmt.out_name] = model
        self.last_extra = {
            "tune": {
                "metric": stmt.metric,
                "direction": direction,
                "best_score": result.best_score,
                "best_hyperparams": dict(result.best.hyperparams),
                "trials": [
                    {"score": s, "resource_fraction": f}
                    for _, s, f in result.history
                ],
            }
        }
        return (f"model {stmt.out_name}: best {stmt.family} "
                f"{stmt.metric}={_fmt(result.best_score)} "
                f"trials={len(result.history)} strategy={strategy}")

    def _do_PredictStmt(self, stmt: PredictStmt) -> str:
        t = self._table(stmt.table)
        model = self._model(stmt.model)
        preds = ml_predict(model, t)
        if t.has_column("id"):
            ids = list(t.column("id").values)
            id_col = dt.Column("id", t.column("id").ctype, tuple(ids))
        else:
            id_col = dt.Column(
                "id", dt.CType.NUMERIC, tuple(float(i) for i in range(t.n_rows))
            )
        if model.task == "regression":
            pred_col = dt.Column("prediction", dt.CType.NUMERIC,
                                 tuple(preds.values))
        else:
            pred_col = dt.Column(
                "prediction",
                dt.CType.NUMERIC if all(
                    isinstance(v, float) for v in preds.values
                ) else dt.CType.CATEGORICAL,
                tuple(preds.values),
            )
        out = dt.Table(stmt.out_name, (id_col, pred_col), n_rows=t.n_rows)
        self.env.tables[stmt.out_name] = out
        return f"predictions {stmt.out_name}: n={t.n_rows}"

    def _do_SaveStmt(self, stmt: SaveStmt) -> str:
        t = self._table(stmt.name)
        if self.artifact_dir is None:
            raise DuetError("no artifact directory configured",
                            code="E_BAD_PATH")
        if stmt.path.startswith("/") or ".." in stmt.path.split("/"):
            raise DuetError("path must be relative with no '..'",
                            code="E_BAD_PATH")
        dest = self.artifact_dir / stmt.path
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(dt.to_csv(t), encoding="utf-8")
        return f"saved {stmt.name} to {stmt.path} ({t.n_rows} rows)"


def execute(script: Script, env: Env, limits: Limits | None = None,
            artifact_dir=None, default_strategy: str = "halving",
            clock: Clock | None = None) -> tuple[Env, ExecReport]:
    """Run a validated script transactionally.

    Returns (new env, report) on success, (original env, report ending in
    the error) on failure. The budget is wall-clock; the reported elapsed
    comes from the injected clock so hermetic runs stay deterministic.
    """
    limits = limits or Limits()
    clock = clock or SystemClock()
    started_wall = time.monotonic()
    started = clock.now_ms()
    work = env.copy()
    executor = _Executor(work, limits, artifact_dir, default_strategy)
    entries: list[StmtOutcome] = []

    def fail(stmt, code: str, message: str) -> tuple[Env, ExecReport]:
        entries.append(StmtOutcome(stmt.line, stmt.render(), ok=False,
                                   code=code, message=message))
        report = ExecReport(entries, elapsed=clock.elapsed_s(started))
        return env, report

    for stmt in script.statements:
        if time.monotonic() - started_wall > limits.max_seconds:
            return fail(stmt, "E_BUDGET",
                        f"script exceeded {limits.max_seconds}s")
        try:
            result = executor.run(stmt)
        except BudgetExceeded as exc:
            return fail(stmt, "E_BUDGET", str(exc))
        except DuetError as exc:
            return fail(stmt, exc.code, str(exc))
        for name, t in work.tables.items():
            if t.n_cells() > limits.max_cells:
                return fail(stmt, "E_BUDGET",
                            f"table {name!r} exceeds {limits.max_cells} cells")
        entries.append(StmtOutcome(stmt.line, stmt.render(), ok=True,
                                   result=result, extra=executor.last_extra))
        work.last_results.append(result)

    elapsed = clock.elapsed_s(started)
    work.budget_used += elapsed
    delta = {
        name: t.version for name, t in work.tables.items()
        if name not in env.tables or env.tables[name].version != t.version
    }
    report = ExecReport(entries, elapsed=elapsed, version_delta=delta)
    return work, report


def render_observation(report: ExecReport, max_chars: int = 2000) -> str:
    """Deterministic per-statement summary, middle-truncated to max_chars."""
    lines = []
    for e in report.entries:
        if e.ok:
            lines.append(f"ok line {e.line}: {e.result}")
        else:
            lines.append(f"ERROR line {e.line} {e.code}: {e.message}")
            hint = ERROR_HINTS.get(e.code)
            if hint:
                lines.append(f"hint: {hint}")
    text = "\n".join(lines)
    if len(text) <= max_chars:
        return text
    marker = "\n...[truncated]...\n"
    half = (max_chars - 0) // 2
    return text[:half] + marker + text[-(max_chars - half):]
