"""Native learners: baseline, ridge regression, logistic regression, CART.

Each learner is small enough to check against an independent oracle
(closed-form solves, finite differences, exhaustive split search). All
randomness is external; training is pure given (spec, table).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..data_toolkit import Column, CType, Table, infer_task
from ..errors import (
    NoSuchColumn,
    SchemaMismatch,
    Singular,
    UnknownHyperparam,
    Unprepared,
)

FAMILIES = ("baseline", "linear", "logistic", "tree")

_KNOWN_HYPERPARAMS = {
    "baseline": set(),
    "linear": {"l2"},
    "logistic": {"lr", "epochs", "l2"},
    "tree": {"max_depth", "min_samples_leaf"},
}

_DEFAULTS = {
    "baseline": {},
    "linear": {"l2": 1e-6},
    "logistic": {"lr": 0.1, "epochs": 500, "l2": 0.0},
    "tree": {"max_depth": 6, "min_samples_leaf": 5},
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def resolved(self) -> dict:
        unknown = set(self.hyperparams) - _KNOWN_HYPERPARAMS[self.family]
        if unknown:
            raise UnknownHyperparam(
                f"{self.family} does not accept: {', '.join(sorted(unknown))}"
            )
        params = dict(_DEFAULTS[self.family])
        params.update(self.hyperparams)
        return params

    def to_json(self) -> dict:
        return {"family": self.family, "hyperparams": dict(self.hyperparams)}


@dataclass(frozen=True)
class Predictions:
    """Regression: values only. Classification: labels plus per-class
    probabilities (classes in sorted order)."""

    task: str
    values: tuple = ()  # regression predictions or argmax labels
    classes: tuple = ()
    probabilities: tuple = ()  # rows of per-class probs, aligned to classes

    def positive_probs(self) -> list[float]:
        # probability of the larger class in sorted order (binary only)
        return [row[-1] for row in self.probabilities]


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    task: str
    feature_schema: tuple[tuple[str, str], ...]  # (name, ctype) at fit time
    target: str
    params: dict  # family-specific fitted parameters

    def to_json(self) -> dict:
        return {
            "format_version": 1,
            "spec": self.spec.to_json(),
            "task": self.task,
            "target": self.target,
            "feature_schema": [list(fs) for fs in self.feature_schema],
            "params": _jsonable(self.params),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainedModel":
        return cls(
            spec=ModelSpec(obj["spec"]["family"], obj["spec"]["hyperparams"]),
            task=obj["task"],
            target=obj["target"],
            feature_schema=tuple(tuple(fs) for fs in obj["feature_schema"]),
            params=obj["params"],
        )


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _feature_matrix(table: Table, target: str) -> tuple[np.ndarray, list[str]]:
    names = []
    cols = []
    for c in table.columns:
        if c.name == target:
            continue
        if c.ctype is not CType.NUMERIC:
            raise Unprepared(f"column {c.name!r} is {c.ctype.value}, not numeric")
        if c.missing_count():
            raise Unprepared(f"column {c.name!r} has missing values")
        names.append(c.name)
        cols.append(np.asarray(c.values, float))
    X = np.column_stack(cols) if cols else np.zeros((table.n_rows, 0))
    return X, names


def _classes_of(target_col: Column) -> list:
    return sorted(set(target_col.present()))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train(spec: ModelSpec, table: Table, target: str) -> TrainedModel:
    if not table.has_column(target):
        raise NoSuchColumn(f"no column {target!r} in table {table.name!r}")
    hp = spec.resolved()
    target_col = table.column(target)
    if target_col.missing_count():
        raise Unprepared(f"target {target!r} has missing values")
    # linear/logistic force the task; baseline/tree follow the target shape
    if spec.family == "linear":
        if target_col.ctype is not CType.NUMERIC:
            raise Unprepared("linear regression requires a numeric target")
        task = "regression"
    elif spec.family == "logistic":
        distinct = len(set(target_col.present()))
        task = ("binary_classification" if distinct == 2
                else "multiclass_classification")
    else:
        distinct = len(set(target_col.present()))
        if target_col.ctype is CType.NUMERIC:
            # numeric targets regress unless 0/1-style binary coding
            task = "binary_classification" if distinct == 2 else "regression"
        else:
            task = ("binary_classification" if distinct == 2
                    else "multiclass_classification")
    X, names = _feature_matrix(table, target)
    schema = tuple(
        (c.name, c.ctype.value) for c in table.columns if c.name != target
    )
    if task == "regression":
        y = np.asarray(target_col.values, float)
        params = _fit_regression(spec.family, hp, X, y)
    else:
        classes = _classes_of(target_col)
        y_idx = np.array([classes.index(v) for v in target_col.values])
        params = _fit_classification(spec.family, hp, X, y_idx, classes)
    return TrainedModel(spec=spec, task=task, feature_schema=schema,
                        target=target, params=params)


def _fit_regression(family: str, hp: dict, X: np.ndarray, y: np.ndarray) -> dict:
    if family == "baseline":
        return {"kind": "constant", "value": float(y.mean())}
    if family == "linear":
        return _fit_ridge(X, y, hp["l2"])
    if family == "tree":
        root = _grow_tree(X, y, "variance",
                          int(hp["max_depth"]), int(hp["min_samples_leaf"]))
        return {"kind": "tree", "root": root}
    if family == "logistic":
        raise Unprepared("logistic regression requires a classification target")
    raise AssertionError(family)


def _fit_classification(family: str, hp: dict, X: np.ndarray,
                        y_idx: np.ndarray, classes: list) -> dict:
    k = len(classes)
    if family == "baseline":
        counts = np.bincount(y_idx, minlength=k).astype(float)
        probs = counts / counts.sum()
        # mode; ties to the first class in sorted order
        mode_idx = int(np.argmax(counts))
        return {"kind": "class_prior", "classes": classes,
                "probs": probs.tolist(), "mode": mode_idx}
    if family == "logistic":
        mu = X.mean(axis=0) if X.size else np.zeros(X.shape[1])
        sigma = np.sqrt(np.mean((X - mu) ** 2, axis=0)) if X.size else np.ones(X.shape[1])
        sigma = np.where(sigma == 0.0, 1.0, sigma)
        Xs = (X - mu) / sigma
        if k == 2:
            weights = [_fit_logistic_gd(Xs, (y_idx == 1).astype(float), hp)]
        else:
            weights = [
                _fit_logistic_gd(Xs, (y_idx == c).astype(float), hp)
                for c in range(k)
            ]
        return {"kind": "logistic", "classes": classes,
                "mu": mu.tolist(), "sigma": sigma.tolist(),
                "weights": [w.tolist() for w in weights]}
    if family == "tree":
        root = _grow_tree(X, y_idx, "gini",
                          int(hp["max_depth"]), int(hp["min_samples_leaf"]),
                          n_classes=k)
        return {"kind": "tree", "classes": classes, "root": root}
    if family == "linear":
        raise Unprepared("linear regression requires a numeric regression target")
    raise AssertionError(family)


def _fit_ridge(X: np.ndarray, y: np.ndarray, l2: float) -> dict:
    """w = (X'X + lam*D)^-1 X'y with an unpenalized intercept column."""
    n = X.shape[0]
    Xi = np.column_stack([np.ones(n), X])
    d = Xi.shape[1]
    penalty = l2 * np.eye(d)
    penalty[0, 0] = 0.0
    A = Xi.T @ Xi + penalty
    b = Xi.T @ y
    try:
        w = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise Singular(f"normal equations not solvable: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise Singular("normal equations produced non-finite weights")
    # guard near-singular solves that numpy does not flag
    if l2 == 0.0 and np.linalg.matrix_rank(A) < d:
        raise Singular("design matrix is rank-deficient at l2=0")
    return {"kind": "ridge", "intercept": float(w[0]),
            "weights": w[1:].tolist()}


def logistic_loss_and_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray,
                           l2: float) -> tuple[float, np.ndarray]:
    """Mean log-loss plus (l2/2)*||w||^2 with the intercept unpenalized.

    w layout: [intercept, feature weights...]. Exposed so tests can check
    the gradient against finite differences.
    """
    n = X.shape[0]
    z = w[0] + X @ w[1:]
    p = np.clip(_sigmoid(z), 1e-15, 1 - 1e-15)
    loss = -float(np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    loss += 0.5 * l2 * float(w[1:] @ w[1:])
    err = p - y
    grad = np.empty_like(w)
    grad[0] = float(err.mean())
    grad[1:] = X.T @ err / n + l2 * w[1:]
    return loss, grad


def _fit_logistic_gd(X: np.ndarray, y: np.ndarray, hp: dict) -> np.ndarray:
    w = np.zeros(X.shape[1] + 1)
    lr, epochs, l2 = float(hp["lr"]), int(hp["epochs"]), float(hp["l2"])
    prev_loss = math.inf
    stall = 0
    for _ in range(epochs):
        loss, grad = logistic_loss_and_grad(w, X, y, l2)
        if prev_loss - loss < 1e-9:
            stall += 1
            if stall >= 10:
                break
        else:
            stall = 0
        prev_loss = loss
        w = w - lr * grad
    return w


# ---------------------------------------------------------------------------
# CART


def _impurity_gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p ** 2).sum())


def _grow_tree(X: np.ndarray, y: np.ndarray, criterion: str,
               max_depth: int, min_leaf: int, n_classes: int = 0) -> dict:
    def leaf(idx: np.ndarray) -> dict:
        if criterion == "variance":
            return {"leaf": True, "value": float(y[idx].mean())}
        counts = np.bincount(y[idx].astype(int), minlength=n_classes).astype(float)
        return {"leaf": True, "counts": counts.tolist()}

    def node_impurity(idx: np.ndarray) -> float:
        ys = y[idx]
        if criterion == "variance":
            return float(np.mean((ys - ys.mean()) ** 2)) * len(ys)
        counts = np.bincount(ys.astype(int), minlength=n_classes).astype(float)
        return _impurity_gini(counts) * len(ys)

    def best_split(idx: np.ndarray):
        # exhaustive scan; ties by lowest feature index then lowest threshold
        best = None  # (score, feature, threshold)
        for j in range(X.shape[1]):
            xs = X[idx, j]
            order = np.argsort(xs, kind="stable")
            sorted_x = xs[order]
            distinct = np.unique(sorted_x)
            for a, b in zip(distinct[:-1], distinct[1:]):
                thr = (a + b) / 2.0
                left = idx[xs <= thr]
                right = idx[xs > thr]
                if len(left) < min_leaf or len(right) < min_leaf:
                    continue
                score = node_impurity(left) + node_impurity(right)
                if best is None or score < best[0] - 1e-12:
                    best = (score, j, thr)
        return best

    def grow(idx: np.ndarray, depth: int) -> dict:
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            return leaf(idx)
        if criterion == "gini":
            if len(set(y[idx].astype(int).tolist())) == 1:
                return leaf(idx)
        elif np.all(y[idx] == y[idx][0]):
            return leaf(idx)
        found = best_split(idx)
        if found is None:
            return leaf(idx)
        _, j, thr = found
        left = idx[X[idx, j] <= thr]
        right = idx[X[idx, j] > thr]
        return {
            "leaf": False, "feature": int(j), "threshold": float(thr),
            "left": grow(left, depth + 1), "right": grow(right, depth + 1),
        }

    return grow(np.arange(len(y)), 0)


def _tree_apply(root: dict, x: np.ndarray) -> dict:
    node = root
    while not node["leaf"]:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node


# ---------------------------------------------------------------------------
# prediction


def predict(model: TrainedModel, table: Table) -> Predictions:
    """Predict on a table matching the fit-time feature schema.

    The model's target column is tolerated (needed to evaluate on labelled
    tables); any other extra, missing, or retyped column is a schema error.
    """
    expected = {name: ctype for name, ctype in model.feature_schema}
    actual = {c.name: c.ctype.value for c in table.columns if c.name != model.target}
    missing = sorted(set(expected) - set(actual))
    extra = sorted(set(actual) - set(expected))
    retyped = sorted(
        n for n in set(expected) & set(actual) if expected[n] != actual[n]
    )
    if missing or extra or retyped:
        raise SchemaMismatch(
            f"missing={missing} extra={extra} retyped={retyped}"
        )
    cols = []
    for name, _ in model.feature_schema:
        c = table.column(name)
        if c.missing_count():
            raise Unprepared(f"column {name!r} has missing values")
        cols.append(np.asarray(c.values, float))
    X = np.column_stack(cols) if cols else np.zeros((table.n_rows, 0))
    p = model.params
    if model.task == "regression":
        if p["kind"] == "constant":
            vals = np.full(table.n_rows, p["value"])
        elif p["kind"] == "ridge":
            vals = p["intercept"] + X @ np.asarray(p["weights"])
        else:
            vals = np.array([_tree_apply(p["root"], x)["value"] for x in X])
        return Predictions(task="regression",
                           values=tuple(float(v) for v in vals))
    classes = p["classes"]
    k = len(classes)
    if p["kind"] == "class_prior":
        probs = np.tile(np.asarray(p["probs"]), (table.n_rows, 1))
    elif p["kind"] == "logistic":
        mu = np.asarray(p["mu"])
        sigma = np.asarray(p["sigma"])
        Xs = (X - mu) / sigma
        ws = [np.asarray(w) for w in p["weights"]]
        if k == 2:
            p1 = _sigmoid(ws[0][0] + Xs @ ws[0][1:])
            probs = np.column_stack([1 - p1, p1])
        else:
            scores = np.column_stack([_sigmoid(w[0] + Xs @ w[1:]) for w in ws])
            denom = scores.sum(axis=1, keepdims=True)
            denom[denom == 0] = 1.0
            probs = scores / denom
    else:  # tree
        rows = []
        for x in X:
            counts = np.asarray(_tree_apply(p["root"], x)["counts"])
            total = counts.sum()
            rows.append(counts / total if total else np.full(k, 1.0 / k))
        probs = np.vstack(rows)
    # argmax with ties to the smallest class in sorted order
    labels = tuple(classes[int(np.argmax(row))] for row in probs)
    return Predictions(
        task=model.task,
        values=labels,
        classes=tuple(classes),
        probabilities=tuple(tuple(float(v) for v in row) for row in probs),
    )


def predictions_to_csv(preds: Predictions, ids: list | None = None) -> str:
    """Export predictions with header ``id,prediction``; row index as id
    when no id column exists."""
    lines = ["id,prediction"]
    for i, v in enumerate(preds.values):
        ident = ids[i] if ids is not None else i
        if isinstance(v, float) and float(v).is_integer():
            v = int(v)
        lines.append(f"{ident},{v}")
    return "\n".join(lines) + "\n"


def save_model(model: TrainedModel, path) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps(model.to_json(), indent=2), encoding="utf-8")


def load_model(path) -> TrainedModel:
    from pathlib import Path

    return TrainedModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
