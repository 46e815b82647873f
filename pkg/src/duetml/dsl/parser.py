"""Line-oriented lexer and recursive-descent parser for pipeline scripts.

Keywords are case-sensitive; ``#`` starts a comment; every statement fits
on one line. Diagnostics carry 1-based line and column so the repair loop
can point at the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import DslSyntax
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

IDENT_RE = re.compile(r"[a-z_][a-z0-9_]*")
NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
STRING_RE = re.compile(r'"((?:[^"\\]|\\.)*)"')

FAMILIES = ("baseline", "linear", "logistic", "tree")
METRICS = ("rmse", "mae", "accuracy", "logloss", "auc")
STRATEGIES = ("random", "halving")
DIM_KINDS = ("uniform", "loguniform", "int", "choice")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | punct
    text: str
    value: object
    col: int  # 1-based


def tokenize(line: str, line_no: int) -> list[Token]:
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        c = line[i]
        if c in " \t":
            i += 1
            continue
        if c == "#":
            break
        col = i + 1
        if c == '"':
            m = STRING_RE.match(line, i)
            if not m:
                raise DslSyntax(line_no, col, "unterminated string")
            raw = m.group(1).replace('\\"', '"').replace("\\\\", "\\")
            tokens.append(Token("string", m.group(0), raw, col))
            i = m.end()
            continue
        m = NUMBER_RE.match(line, i)
        if m and (c.isdigit() or c in "+-." ):
            text = m.group(0)
            value = int(text) if re.fullmatch(r"[+-]?\d+", text) else float(text)
            tokens.append(Token("number", text, value, col))
            i = m.end()
            continue
        m = IDENT_RE.match(line, i)
        if m:
            tokens.append(Token("ident", m.group(0), m.group(0), col))
            i = m.end()
            continue
        if c in ".,:={}()":
            tokens.append(Token("punct", c, c, col))
            i += 1
            continue
        raise DslSyntax(line_no, col, f"unexpected character {c!r}")
    return tokens


class _LineParser:
    def __init__(self, tokens: list[Token], line_no: int, line_len: int):
        self.tokens = tokens
        self.pos = 0
        self.line_no = line_no
        self.line_len = line_len

    def _col(self) -> int:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos].col
        return self.line_len + 1

    def error(self, expected: str):
        raise DslSyntax(self.line_no, self._col(), f"expected {expected}")

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            self.error("more input")
        self.pos += 1
        return tok

    def expect_punct(self, ch: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "punct" or tok.text != ch:
            self.error(f'"{ch}"')
        return self.take()

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "ident" or tok.text != word:
            self.error(f'keyword "{word}"')
        return self.take()

    def expect_ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            self.error(what)
        return self.take().text

    def expect_choice(self, options: tuple, what: str) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "ident" or tok.text not in options:
            self.error(f"{what} (one of {', '.join(options)})")
        return self.take().text

    def expect_number(self, what: str = "number"):
        tok = self.peek()
        if tok is None or tok.kind != "number":
            self.error(what)
        return self.take().value

    def expect_int(self, what: str = "integer") -> int:
        tok = self.peek()
        if tok is None or tok.kind != "number" or not isinstance(tok.value, int):
            self.error(what)
        return self.take().value

    def expect_string(self, what: str = "string") -> str:
        tok = self.peek()
        if tok is None or tok.kind != "string":
            self.error(what)
        return self.take().value

    def expect_literal(self, what: str = "literal"):
        tok = self.peek()
        if tok is None or tok.kind not in ("number", "string", "ident"):
            self.error(what)
        return self.take().value

    def expect_col_ref(self) -> tuple[str, str]:
        table = self.expect_ident("table.column reference")
        self.expect_punct(".")
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            self.error("column name after '.'")
        return table, self.take().text

    def expect_end(self):
        if not self.at_end():
            self.error("end of statement")


def _parse_statement(p: _LineParser):
    line = p.line_no
    head = p.peek()
    if head is None or head.kind != "ident":
        p.error("a statement keyword")
    kw = head.text
    if kw == "profile":
        p.take()
        table = p.expect_ident("table name")
        p.expect_end()
        return ProfileStmt(table, line=line)
    if kw == "impute":
        p.take()
        table, column = p.expect_col_ref()
        p.expect_keyword("with")
        strategy = p.expect_choice(("mean", "median", "mode", "constant"),
                                   "impute strategy")
        constant = None
        if strategy == "constant":
            constant = p.expect_literal("constant value")
        p.expect_end()
        return ImputeStmt(table, column, strategy, constant, line=line)
    if kw == "onehot":
        p.take()
        table, column = p.expect_col_ref()
        max_card = None
        if not p.at_end():
            p.expect_keyword("max")
            max_card = p.expect_int("max cardinality")
        p.expect_end()
        return OnehotStmt(table, column, max_card, line=line)
    if kw == "scale":
        p.take()
        table, column = p.expect_col_ref()
        kind = p.expect_choice(("standard", "minmax"), "scale kind")
        p.expect_end()
        return ScaleStmt(table, column, kind, line=line)
    if kw == "clip_outliers":
        p.take()
        table, column = p.expect_col_ref()
        method = p.expect_choice(("iqr", "zscore"), "clip method")
        k = None
        if method == "zscore":
            k = float(p.expect_number("zscore k"))
        elif not p.at_end():
            k = float(p.expect_number("iqr k"))
        p.expect_end()
        return ClipOutliersStmt(table, column, method, k, line=line)
    if kw == "drop":
        p.take()
        table, column = p.expect_col_ref()
        p.expect_end()
        return DropStmt(table, column, line=line)
    if kw == "select_features":
        p.take()
        table = p.expect_ident("table name")
        p.expect_keyword("target")
        target = p.expect_ident("target column")
        p.expect_keyword("top")
        top_k = p.expect_int("top-k count")
        p.expect_end()
        return SelectFeaturesStmt(table, target, top_k, line=line)
    if kw == "split":
        p.take()
        table = p.expect_ident("table name")
        p.expect_keyword("into")
        out1 = p.expect_ident("first output table")
        p.expect_punct(",")
        out2 = p.expect_ident("second output table")
        p.expect_keyword("ratio")
        ratio = float(p.expect_number("split ratio"))
        p.expect_keyword("seed")
        seed = p.expect_int("seed")
        p.expect_end()
        return SplitStmt(table, out1, out2, ratio, seed, line=line)
    if kw == "train":
        p.take()
        family = p.expect_choice(FAMILIES, "model family")
        p.expect_keyword("on")
        table = p.expect_ident("table name")
        p.expect_keyword("target")
        target = p.expect_ident("target column")
        params = []
        while not p.at_end():
            tok = p.peek()
            if tok.kind == "ident" and tok.text == "as":
                break
            name = p.expect_ident("hyperparameter name")
            p.expect_punct("=")
            params.append((name, p.expect_literal("hyperparameter value")))
        p.expect_keyword("as")
        out = p.expect_ident("model name")
        p.expect_end()
        return TrainStmt(family, table, target, tuple(params), out, line=line)
    if kw == "evaluate":
        p.take()
        model = p.expect_ident("model name")
        p.expect_keyword("on")
        table = p.expect_ident("table name")
        p.expect_keyword("metric")
        met = p.expect_choice(METRICS, "metric")
        p.expect_end()
        return EvaluateStmt(model, table, met, line=line)
    if kw == "tune":
        p.take()
        family = p.expect_choice(FAMILIES, "model family")
        p.expect_keyword("on")
        table = p.expect_ident("table name")
        p.expect_keyword("target")
        target = p.expect_ident("target column")
        p.expect_keyword("metric")
        met = p.expect_choice(METRICS, "metric")
        p.expect_keyword("budget")
        budget = p.expect_int("budget")
        cv = None
        strategy = None
        tok = p.peek()
        if tok is not None and tok.kind == "ident" and tok.text == "cv":
            p.take()
            cv = p.expect_int("cv fold count")
            tok = p.peek()
        if tok is not None and tok.kind == "ident" and tok.text == "strategy":
            p.take()
            strategy = p.expect_choice(STRATEGIES, "strategy")
        p.expect_keyword("space")
        p.expect_punct("{")
        dims = [_parse_dim(p)]
        while p.peek() is not None and p.peek().text == ",":
            p.take()
            dims.append(_parse_dim(p))
        p.expect_punct("}")
        p.expect_keyword("as")
        out = p.expect_ident("model name")
        p.expect_end()
        return TuneStmt(family, table, target, met, budget, tuple(dims), out,
                        cv=cv, strategy=strategy, line=line)
    if kw == "predict":
        p.take()
        model = p.expect_ident("model name")
        p.expect_keyword("on")
        table = p.expect_ident("table name")
        p.expect_keyword("as")
        out = p.expect_ident("output table name")
        p.expect_end()
        return PredictStmt(model, table, out, line=line)
    if kw == "save":
        p.take()
        name = p.expect_ident("table name")
        path = p.expect_string("quoted path")
        p.expect_end()
        return SaveStmt(name, path, line=line)
    p.error("a statement keyword (profile, impute, onehot, scale, "
            "clip_outliers, drop, select_features, split, train, evaluate, "
            "tune, predict, save)")


def _parse_dim(p: _LineParser) -> SpaceDim:
    name = p.expect_ident("dimension name")
    p.expect_punct(":")
    kind = p.expect_choice(DIM_KINDS, "dimension kind")
    p.expect_punct("(")
    args = [p.expect_literal("dimension argument")]
    while p.peek() is not None and p.peek().text == ",":
        p.take()
        args.append(p.expect_literal("dimension argument"))
    p.expect_punct(")")
    return SpaceDim(name, kind, tuple(args))


def parse(source: str) -> Script:
    statements = []
    for line_no, raw in enumerate(source.split("\n"), start=1):
        tokens = tokenize(raw, line_no)
        if not tokens:
            continue  # blank or comment-only line
        p = _LineParser(tokens, line_no, len(raw))
        statements.append(_parse_statement(p))
    if not statements:
        raise DslSyntax(1, 1, "expected at least one statement")
    return Script(tuple(statements), source_text=source)
