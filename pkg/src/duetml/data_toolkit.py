"""Typed columnar tables: CSV ingestion, profiling, and transforms.

Tables are immutable values: every transform returns a new Table with a
bumped version and a lineage record, leaving the input untouched. Missing
values are explicit (Python ``None``), never sentinels. All statistics use
the population standard deviation, one convention everywhere.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    AllMissing,
    CsvSyntax,
    DupHeader,
    EmptyInput,
    HasMissing,
    NoNumericFeatures,
    NoSuchColumn,
    RaggedRow,
    TooFewRows,
    TypeMismatch,
)
from .rng import shuffled_indices

MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none"}


class CType(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TEXT = "text"


@dataclass(frozen=True)
class Column:
    name: str
    ctype: CType
    values: tuple  # entries are float, str, or None (missing)

    def missing_count(self) -> int:
        return sum(1 for v in self.values if v is None)

    def present(self) -> list:
        return [v for v in self.values if v is not None]


@dataclass(frozen=True)
class TransformRecord:
    op: str
    params: dict
    input_version: int
    output_version: int
    affected_columns: tuple[str, ...]


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    n_rows: int
    version: int = 1
    lineage: tuple[TransformRecord, ...] = ()

    def __post_init__(self):
        names = [c.name for c in self.columns]
        assert len(names) == len(set(names)), "duplicate column names"
        for c in self.columns:
            assert len(c.values) == self.n_rows, f"column {c.name} length mismatch"

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise NoSuchColumn(f"no column {name!r} in table {self.name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def n_cells(self) -> int:
        return len(self.columns) * self.n_rows

    def _evolve(self, op: str, params: dict, affected: list[str],
                columns: tuple[Column, ...], n_rows: int | None = None) -> "Table":
        record = TransformRecord(
            op=op,
            params=params,
            input_version=self.version,
            output_version=self.version + 1,
            affected_columns=tuple(affected),
        )
        return replace(
            self,
            columns=columns,
            n_rows=self.n_rows if n_rows is None else n_rows,
            version=self.version + 1,
            lineage=self.lineage + (record,),
        )


def _parse_number(token: str) -> float | None:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def infer_column(name: str, raw: list[str]) -> Column:
    """Type inference: numeric if every present cell parses as a real;
    categorical if the distinct count is small; else text."""
    present = [t for t in raw if not _is_missing(t)]
    parsed = [_parse_number(t) for t in present]
    if present and all(p is not None for p in parsed):
        values = tuple(
            None if _is_missing(t) else _parse_number(t) for t in raw
        )
        return Column(name, CType.NUMERIC, values)
    distinct = len({t.strip() for t in present})
    n = len(raw)
    if present and distinct <= max(20, 0.5 * n) and distinct <= 1000:
        ctype = CType.CATEGORICAL
    else:
        ctype = CType.TEXT
    values = tuple(None if _is_missing(t) else t.strip() for t in raw)
    return Column(name, ctype, values)


def read_csv(data: bytes | str, name: str) -> Table:
    """Parse RFC-4180 CSV (UTF-8, header row required) with type inference."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CsvSyntax(f"not valid UTF-8: {exc}") from exc
    else:
        text = data
    reader = csv.reader(io.StringIO(text), strict=True)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise CsvSyntax(f"line {reader.line_num}: {exc}") from exc
    rows = [r for r in rows if r]  # drop fully empty lines
    if not rows:
        raise EmptyInput("no header row")
    header, data_rows = rows[0], rows[1:]
    seen = set()
    for h in header:
        if h in seen:
            raise DupHeader(f"duplicate header {h!r}")
        seen.add(h)
    if not data_rows:
        raise EmptyInput("no data rows")
    for i, row in enumerate(data_rows, start=2):
        if len(row) != len(header):
            raise RaggedRow(
                f"line {i}: expected {len(header)} fields, got {len(row)}"
            )
    columns = tuple(
        infer_column(h, [row[j] for row in data_rows])
        for j, h in enumerate(header)
    )
    return Table(name=name, columns=columns, n_rows=len(data_rows))


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.column_names())
    for i in range(table.n_rows):
        row = []
        for c in table.columns:
            v = c.values[i]
            if v is None:
                row.append("")
            elif isinstance(v, float) and v.is_integer():
                row.append(str(int(v)))
            else:
                row.append(str(v))
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# profiling


def _pop_std(xs: np.ndarray) -> float:
    return float(np.sqrt(np.mean((xs - xs.mean()) ** 2)))


def pearson_r(x: list[float], y: list[float]) -> tuple[float, bool]:
    """(r, degenerate). Degenerate when either side has zero variance;
    reported as r=0.0 so downstream ranking still works."""
    xa, ya = np.asarray(x, float), np.asarray(y, float)
    sx, sy = _pop_std(xa), _pop_std(ya)
    if sx == 0.0 or sy == 0.0 or len(xa) == 0:
        return 0.0, True
    cov = float(np.mean((xa - xa.mean()) * (ya - ya.mean())))
    r = cov / (sx * sy)
    return max(-1.0, min(1.0, r)), False


@dataclass(frozen=True)
class ColumnProfile:
    name: str
    ctype: CType
    missing_rate: float
    mean: float | None = None
    std: float | None = None
    min: float | None = None
    max: float | None = None
    cardinality: int | None = None
    top_values: tuple[tuple[str, int], ...] | None = None
    correlation: float | None = None
    correlation_degenerate: bool = False


@dataclass(frozen=True)
class Profile:
    table_name: str
    row_count: int
    column_count: int
    columns: tuple[ColumnProfile, ...]
    task: str | None = None  # regression | binary_classification | multiclass_classification
    target: str | None = None

    def to_json(self) -> dict:
        cols = {}
        for cp in self.columns:
            entry: dict = {
                "type": cp.ctype.value,
                "missing_rate": cp.missing_rate,
            }
            if cp.ctype is CType.NUMERIC:
                entry.update(mean=cp.mean, std=cp.std, min=cp.min, max=cp.max)
            if cp.cardinality is not None:
                entry["cardinality"] = cp.cardinality
                entry["top_values"] = [list(t) for t in cp.top_values or ()]
            if cp.correlation is not None:
                entry["correlation"] = cp.correlation
            cols[cp.name] = entry
        out = {
            "table": self.table_name,
            "row_count": self.row_count,
            "column_count": self.column_count,
            "columns": cols,
        }
        if self.task:
            out["task"] = self.task
            out["target"] = self.target
        return out


def infer_task(target: Column) -> str:
    distinct = len(set(target.present()))
    if target.ctype is CType.NUMERIC and distinct > 10:
        return "regression"
    if distinct == 2:
        return "binary_classification"
    return "multiclass_classification"


def _target_as_numeric(target: Column) -> list | None:
    """Numeric view of the target for correlations: numeric as-is, binary
    categorical coded 0/1 (lexicographic order); otherwise None."""
    if target.ctype is CType.NUMERIC:
        return list(target.values)
    distinct = sorted(set(target.present()))
    if len(distinct) == 2:
        code = {distinct[0]: 0.0, distinct[1]: 1.0}
        return [None if v is None else code[v] for v in target.values]
    return None


def profile(table: Table, target: str | None = None) -> Profile:
    target_col = table.column(target) if target is not None else None
    task = infer_task(target_col) if target_col is not None else None
    # correlations only for numeric or binary targets; absent otherwise
    target_numeric = (
        _target_as_numeric(target_col) if target_col is not None else None
    )
    col_profiles = []
    for c in table.columns:
        missing_rate = c.missing_count() / table.n_rows if table.n_rows else 0.0
        cp_kwargs: dict = dict(
            name=c.name, ctype=c.ctype, missing_rate=missing_rate
        )
        if c.ctype is CType.NUMERIC:
            present = np.asarray(c.present(), float)
            if len(present):
                cp_kwargs.update(
                    mean=float(present.mean()),
                    std=_pop_std(present),
                    min=float(present.min()),
                    max=float(present.max()),
                )
            if (
                target_numeric is not None
                and c.name != target_col.name
            ):
                pairs = [
                    (x, y)
                    for x, y in zip(c.values, target_numeric)
                    if x is not None and y is not None
                ]
                if pairs:
                    r, degenerate = pearson_r(*map(list, zip(*pairs)))
                else:
                    r, degenerate = 0.0, True
                cp_kwargs.update(correlation=r, correlation_degenerate=degenerate)
        else:
            counts: dict[str, int] = {}
            for v in c.values:
                if v is not None:
                    counts[v] = counts.get(v, 0) + 1
            top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
            cp_kwargs.update(cardinality=len(counts), top_values=tuple(top))
        col_profiles.append(ColumnProfile(**cp_kwargs))
    return Profile(
        table_name=table.name,
        row_count=table.n_rows,
        column_count=len(table.columns),
        columns=tuple(col_profiles),
        task=task,
        target=target,
    )


# ---------------------------------------------------------------------------
# transforms


def _replace_column(table: Table, name: str, new_col: Column) -> tuple[Column, ...]:
    return tuple(new_col if c.name == name else c for c in table.columns)


def impute(table: Table, column: str, strategy: str,
           constant=None) -> Table:
    """Fill missings. Strategies: mean, median, mode, constant."""
    col = table.column(column)
    if strategy in ("mean", "median") and col.ctype is not CType.NUMERIC:
        raise TypeMismatch(f"{strategy} imputation requires a numeric column")
    present = col.present()
    if strategy == "constant":
        fill = constant
        if col.ctype is CType.NUMERIC:
            fill = float(fill)
    else:
        if not present:
            raise AllMissing(f"column {column!r} has no non-missing values")
        if strategy == "mean":
            fill = float(np.mean(present))
        elif strategy == "median":
            xs = sorted(present)
            n = len(xs)
            if n % 2 == 1:
                fill = float(xs[n // 2])
            else:
                fill = float((xs[n // 2 - 1] + xs[n // 2]) / 2)
        elif strategy == "mode":
            # tie-break: first in order of appearance
            counts: dict = {}
            order: list = []
            for v in present:
                if v not in counts:
                    order.append(v)
                counts[v] = counts.get(v, 0) + 1
            fill = max(order, key=lambda v: counts[v])
        else:
            raise ValueError(f"unknown impute strategy {strategy!r}")
    values = tuple(fill if v is None else v for v in col.values)
    new_col = Column(col.name, col.ctype, values)
    return table._evolve(
        "impute",
        {"column": column, "strategy": strategy, "constant": constant},
        [column],
        _replace_column(table, column, new_col),
    )


def scale(table: Table, column: str, kind: str) -> Table:
    """standard: (x-mu)/sigma, sigma=0 -> zeros; minmax: (x-min)/(max-min)."""
    col = table.column(column)
    if col.ctype is not CType.NUMERIC:
        raise TypeMismatch(f"scale requires a numeric column, got {col.ctype.value}")
    if col.missing_count():
        raise HasMissing(f"column {column!r} has missing values")
    xs = np.asarray(col.values, float)
    if kind == "standard":
        sigma = _pop_std(xs)
        out = np.zeros_like(xs) if sigma == 0.0 else (xs - xs.mean()) / sigma
    elif kind == "minmax":
        lo, hi = xs.min(), xs.max()
        out = np.zeros_like(xs) if hi == lo else (xs - lo) / (hi - lo)
    else:
        raise ValueError(f"unknown scale kind {kind!r}")
    new_col = Column(col.name, CType.NUMERIC, tuple(float(v) for v in out))
    return table._evolve(
        "scale", {"column": column, "kind": kind}, [column],
        _replace_column(table, column, new_col),
    )


def onehot(table: Table, column: str, max_card: int = 32) -> Table:
    """Replace a categorical column with 0/1 indicator columns.

    One column per category in lexicographic order, named ``col=value``;
    categories beyond the max_card most frequent collapse into
    ``col=__other__``. Missing rows get all zeros.
    """
    col = table.column(column)
    if col.ctype is not CType.CATEGORICAL:
        raise TypeMismatch(f"onehot requires a categorical column")
    counts: dict[str, int] = {}
    for v in col.present():
        counts[v] = counts.get(v, 0) + 1
    # most frequent first, ties by value for determinism
    by_freq = sorted(counts, key=lambda v: (-counts[v], v))
    kept = set(by_freq[:max_card])
    overflow = len(counts) > max_card
    categories = sorted(kept)
    names = [f"{column}={v}" for v in categories]
    if overflow:
        names.append(f"{column}=__other__")
    new_cols = []
    for cat_name, cat in zip(names, categories + (["__other__"] if overflow else [])):
        if cat == "__other__":
            values = tuple(
                1.0 if (v is not None and v not in kept) else 0.0
                for v in col.values
            )
        else:
            values = tuple(1.0 if v == cat else 0.0 for v in col.values)
        new_cols.append(Column(cat_name, CType.NUMERIC, values))
    columns = []
    for c in table.columns:
        if c.name == column:
            columns.extend(new_cols)
        else:
            columns.append(c)
    return table._evolve(
        "onehot", {"column": column, "max_card": max_card},
        [column] + names, tuple(columns),
    )


def clip_outliers(table: Table, column: str, method: str, k: float = 1.5) -> Table:
    """iqr: clip to [Q1-k*IQR, Q3+k*IQR]; zscore: clip to [mu-k*sigma, mu+k*sigma]."""
    col = table.column(column)
    if col.ctype is not CType.NUMERIC:
        raise TypeMismatch("clip_outliers requires a numeric column")
    if col.missing_count():
        raise HasMissing(f"column {column!r} has missing values")
    xs = np.asarray(col.values, float)
    if method == "iqr":
        q1, q3 = np.percentile(xs, [25, 75], method="linear")
        iqr = q3 - q1
        lo, hi = q1 - k * iqr, q3 + k * iqr
    elif method == "zscore":
        mu, sigma = xs.mean(), _pop_std(xs)
        lo, hi = mu - k * sigma, mu + k * sigma
    else:
        raise ValueError(f"unknown clip method {method!r}")
    out = np.clip(xs, lo, hi)
    new_col = Column(col.name, CType.NUMERIC, tuple(float(v) for v in out))
    return table._evolve(
        "clip_outliers", {"column": column, "method": method, "k": k},
        [column], _replace_column(table, column, new_col),
    )


def drop(table: Table, column: str) -> Table:
    table.column(column)  # existence check
    columns = tuple(c for c in table.columns if c.name != column)
    return table._evolve("drop", {"column": column}, [column], columns)


def _take_rows(table: Table, idx, name: str, version: int = 1) -> Table:
    columns = tuple(
        Column(c.name, c.ctype, tuple(c.values[i] for i in idx))
        for c in table.columns
    )
    return Table(name=name, columns=columns, n_rows=len(idx), version=version)


def split(table: Table, ratio: float, seed: int,
          names: tuple[str, str] = ("a", "b")) -> tuple[Table, Table]:
    """Seeded shuffle, first ceil(ratio*n) rows to the first table."""
    if table.n_rows < 2:
        raise TooFewRows("split requires at least 2 rows")
    assert 0 < ratio < 1
    perm = shuffled_indices(table.n_rows, seed)
    cut = math.ceil(ratio * table.n_rows)
    return (
        _take_rows(table, perm[:cut].tolist(), names[0]),
        _take_rows(table, perm[cut:].tolist(), names[1]),
    )


def select_features(table: Table, target: str, top_k: int) -> Table:
    """Keep the target, the top_k numeric features by |Pearson r| (ties by
    column order), and all categorical/text columns untouched."""
    target_col = table.column(target)
    target_numeric = _target_as_numeric(target_col)
    if target_numeric is None:
        raise TypeMismatch("select_features requires a numeric or binary target")
    numeric_features = [
        c for c in table.columns
        if c.ctype is CType.NUMERIC and c.name != target
    ]
    if not numeric_features:
        raise NoNumericFeatures("no numeric feature columns")
    scored = []
    for pos, c in enumerate(numeric_features):
        pairs = [
            (x, y) for x, y in zip(c.values, target_numeric)
            if x is not None and y is not None
        ]
        if pairs:
            r, _ = pearson_r(*map(list, zip(*pairs)))
        else:
            r = 0.0
        scored.append((-abs(r), pos, c.name))
    scored.sort()
    keep_numeric = {name for _, _, name in scored[:top_k]}
    columns = tuple(
        c for c in table.columns
        if c.name == target or c.ctype is not CType.NUMERIC
        or c.name in keep_numeric
    )
    return table._evolve(
        "select_features", {"target": target, "top_k": top_k},
        [c.name for c in table.columns if c.name not in {x.name for x in columns}],
        columns,
    )
