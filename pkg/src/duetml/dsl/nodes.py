"""AST for the pipeline language, with a canonical renderer.

One statement per line; ``render()`` emits the canonical source form so
that parse(render(script)) round-trips exactly. Line numbers are carried
for diagnostics but excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def render_literal(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        # bare identifiers render unquoted, everything else quoted
        if v and (v[0].islower() or v[0] == "_") and all(
            c.islower() or c.isdigit() or c == "_" for c in v
        ):
            return v
        return '"' + v.replace('"', '\\"') + '"'
    raise TypeError(f"cannot render literal {v!r}")


@dataclass(frozen=True)
class Stmt:
    line: int = field(default=0, compare=False, kw_only=True)

    def render(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ProfileStmt(Stmt):
    table: str

    def render(self) -> str:
        return f"profile {self.table}"


@dataclass(frozen=True)
class ImputeStmt(Stmt):
    table: str
    column: str
    strategy: str  # mean | median | mode | constant
    constant: object = None

    def render(self) -> str:
        s = f"impute {self.table}.{self.column} with {self.strategy}"
        if self.strategy == "constant":
            s += f" {render_literal(self.constant)}"
        return s


@dataclass(frozen=True)
class OnehotStmt(Stmt):
    table: str
    column: str
    max_card: int | None = None

    def render(self) -> str:
        s = f"onehot {self.table}.{self.column}"
        if self.max_card is not None:
            s += f" max {self.max_card}"
        return s


@dataclass(frozen=True)
class ScaleStmt(Stmt):
    table: str
    column: str
    kind: str  # standard | minmax

    def render(self) -> str:
        return f"scale {self.table}.{self.column} {self.kind}"


@dataclass(frozen=True)
class ClipOutliersStmt(Stmt):
    table: str
    column: str
    method: str  # iqr | zscore
    k: float | None = None  # iqr default 1.5 when omitted

    def render(self) -> str:
        s = f"clip_outliers {self.table}.{self.column} {self.method}"
        if self.k is not None:
            s += f" {render_literal(self.k)}"
        return s


@dataclass(frozen=True)
class DropStmt(Stmt):
    table: str
    column: str

    def render(self) -> str:
        return f"drop {self.table}.{self.column}"


@dataclass(frozen=True)
class SelectFeaturesStmt(Stmt):
    table: str
    target: str
    top_k: int

    def render(self) -> str:
        return f"select_features {self.table} target {self.target} top {self.top_k}"


@dataclass(frozen=True)
class SplitStmt(Stmt):
    table: str
    out1: str
    out2: str
    ratio: float
    seed: int

    def render(self) -> str:
        return (f"split {self.table} into {self.out1}, {self.out2} "
                f"ratio {render_literal(self.ratio)} seed {self.seed}")


@dataclass(frozen=True)
class TrainStmt(Stmt):
    family: str
    table: str
    target: str
    params: tuple  # ordered (name, value) pairs
    out_name: str

    def render(self) -> str:
        s = f"train {self.family} on {self.table} target {self.target}"
        for k, v in self.params:
            s += f" {k}={render_literal(v)}"
        return s + f" as {self.out_name}"


@dataclass(frozen=True)
class EvaluateStmt(Stmt):
    model: str
    table: str
    metric: str

    def render(self) -> str:
        return f"evaluate {self.model} on {self.table} metric {self.metric}"


@dataclass(frozen=True)
class SpaceDim:
    name: str
    kind: str  # uniform | loguniform | int | choice
    args: tuple

    def render(self) -> str:
        args = ", ".join(render_literal(a) for a in self.args)
        return f"{self.name}: {self.kind}({args})"


@dataclass(frozen=True)
class TuneStmt(Stmt):
    family: str
    table: str
    target: str
    metric: str
    budget: int
    space: tuple  # of SpaceDim
    out_name: str
    cv: int | None = None
    strategy: str | None = None  # random | halving; None = caller default

    def render(self) -> str:
        s = (f"tune {self.family} on {self.table} target {self.target} "
             f"metric {self.metric} budget {self.budget}")
        if self.cv is not None:
            s += f" cv {self.cv}"
        if self.strategy is not None:
            s += f" strategy {self.strategy}"
        dims = ", ".join(d.render() for d in self.space)
        return s + " space { " + dims + " } as " + self.out_name


@dataclass(frozen=True)
class PredictStmt(Stmt):
    model: str
    table: str
    out_name: str

    def render(self) -> str:
        return f"predict {self.model} on {self.table} as {self.out_name}"


@dataclass(frozen=True)
class SaveStmt(Stmt):
    name: str
    path: str

    def render(self) -> str:
        return f'save {self.name} "{self.path}"'


@dataclass(frozen=True)
class Script:
    statements: tuple
    source_text: str = field(default="", compare=False)

    def __post_init__(self):
        assert self.statements, "script must be non-empty"


def render_source(script: Script) -> str:
    return "\n".join(s.render() for s in script.statements)
