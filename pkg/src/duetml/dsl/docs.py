"""The pipeline-language reference served by the read_docs tool.

The grammar text here is normative: it is exactly what the coding agent
reads, and it documents the agent reply format too.
"""

from __future__ import annotations

_SECTIONS = {
    "format": """\
AGENT REPLY FORMAT
Reply with markers at the start of a line (case-sensitive):
  Thought: <one line, optional>
  Action: <tool name>
  Action Input: <tool input, may span multiple lines>
or finish with:
  Final Answer: <answer text>
Scripts handed to delegate_code must be a single fenced code block:
  ```
  <one statement per line>
  ```
""",
    "profile": """\
profile T
  Summarize table T: row/column counts, missing cells.
""",
    "impute": """\
impute T.C with (mean|median|mode|constant <lit>)
  Fill missing values in column C of table T. mean/median need a numeric
  column; mode works on any; constant takes a literal.
""",
    "onehot": """\
onehot T.C [max <int>]
  Replace categorical column C with 0/1 indicator columns named C=value
  (lexicographic order). Categories beyond the <max> (default 32) most
  frequent collapse into C=__other__. Missing rows get all zeros.
""",
    "scale": """\
scale T.C (standard|minmax)
  standard: (x-mean)/std (population std; constant columns become zeros).
  minmax: (x-min)/(max-min) (constant columns become zeros).
  The column must be numeric with no missing values.
""",
    "clip_outliers": """\
clip_outliers T.C (iqr [<num>] | zscore <num>)
  iqr: clip to [Q1-k*IQR, Q3+k*IQR], k defaults to 1.5.
  zscore: clip to [mean-k*std, mean+k*std].
  The column must be numeric with no missing values.
""",
    "drop": """\
drop T.C
  Remove column C from table T.
""",
    "select_features": """\
select_features T target C top <int>
  Keep the target, the top-k numeric features by absolute Pearson
  correlation with the target, and all categorical columns.
""",
    "split": """\
split T into A, B ratio <num> seed <int>
  Shuffle T with the seed and put the first ceil(ratio*n) rows in A, the
  rest in B. A and B must be new table names.
""",
    "train": """\
train (baseline|linear|logistic|tree) on T target C [key=value ...] as M
  Train a model and bind it to name M. All feature columns must be numeric
  with no missing values (impute/onehot first).
  Hyperparameters:
    linear:   l2 (default 1e-6)
    logistic: lr (default 0.1), epochs (default 500), l2 (default 0.0)
    tree:     max_depth (default 6), min_samples_leaf (default 5)
  linear is always regression; logistic is always classification.
""",
    "evaluate": """\
evaluate M on T metric (rmse|mae|accuracy|logloss|auc)
  Score model M on table T (T must contain the model's target column).
  rmse/mae are for regression; accuracy/logloss/auc for classification.
""",
    "tune": """\
tune <family> on T target C metric <metric> budget <int> [cv <int>]
     [strategy (random|halving)] space { key: kind(args), ... } as M
  Hyperparameter search over the space; the best configuration is
  retrained on all of T and bound to M.
  Space kinds: uniform(lo, hi), loguniform(lo, hi), int(lo, hi),
  choice(v1, v2, ...).
  strategy random evaluates <budget> samples at full data; halving starts
  <budget> samples at a small data fraction and keeps the best half each
  rung (budget must be >= 2 for halving).
  cv k scores each candidate with k-fold cross-validation; otherwise an
  internal 80/20 holdout is used. Subsampling/CV uses a fixed seed, so
  tuning is reproducible.
""",
    "predict": """\
predict M on T as P
  Predict with model M on table T and bind a table P with columns
  id, prediction. T's id column is used when present, else the row index.
""",
    "save": """\
save P "<path>"
  Write table P as CSV under the session artifact directory. The path must
  be relative with no '..' segments.
""",
    "general": """\
GENERAL RULES
One statement per line. '#' starts a comment. Keywords are case-sensitive.
Identifiers match [a-z_][a-z0-9_]*; columns are referenced as table.column.
Scripts are transactional: if any statement fails, the whole script is
rolled back and nothing is committed.
There is no ensemble construct; exactly one model produces the final
predictions.
""",
}


def dsl_reference(topic: str | None = None) -> str:
    """The full reference, or the sections matching a topic keyword."""
    if topic:
        key = topic.strip().lower()
        matches = [body for name, body in _SECTIONS.items() if key in name]
        if matches:
            return "\n".join(matches)
    return "\n".join(_SECTIONS.values())
