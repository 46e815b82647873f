"""Evaluation metrics and cross-validation."""

from __future__ import annotations

import math

import numpy as np

from ..data_toolkit import Table, _take_rows
from ..errors import Degenerate, LengthMismatch, TooFewRows
from ..rng import shuffled_indices
from .models import ModelSpec, Predictions, predict, train

METRICS = ("rmse", "mae", "accuracy", "logloss", "auc")

#: optimization direction per metric
DIRECTION = {
    "rmse": "minimize",
    "mae": "minimize",
    "logloss": "minimize",
    "accuracy": "maximize",
    "auc": "maximize",
}

REGRESSION_METRICS = {"rmse", "mae"}
CLASSIFICATION_METRICS = {"accuracy", "logloss", "auc"}


def _binary_truth(truth: list) -> np.ndarray:
    """0/1 coding of a binary truth vector; positive = larger class in
    sorted order."""
    classes = sorted(set(truth))
    if len(classes) != 2:
        raise Degenerate(f"binary metric needs exactly 2 classes, got {len(classes)}")
    return np.array([1.0 if t == classes[1] else 0.0 for t in truth])


def metric(kind: str, truth: list, predictions) -> float:
    """Score predictions against truth.

    ``predictions`` may be a Predictions object or a raw list (values for
    rmse/mae, labels for accuracy, positive-class probabilities for
    logloss/auc).
    """
    if isinstance(predictions, Predictions):
        if kind in ("rmse", "mae"):
            preds = list(predictions.values)
        elif kind == "accuracy":
            preds = list(predictions.values)
        else:
            preds = predictions.positive_probs()
    else:
        preds = list(predictions)
    if len(truth) != len(preds):
        raise LengthMismatch(f"{len(truth)} truths vs {len(preds)} predictions")
    if not truth:
        raise LengthMismatch("empty inputs")
    if kind == "rmse":
        d = np.asarray(preds, float) - np.asarray(truth, float)
        return float(np.sqrt(np.mean(d ** 2)))
    if kind == "mae":
        d = np.asarray(preds, float) - np.asarray(truth, float)
        return float(np.mean(np.abs(d)))
    if kind == "accuracy":
        return float(np.mean([1.0 if p == t else 0.0 for p, t in zip(preds, truth)]))
    if kind == "logloss":
        y = _binary_truth(truth)
        p = np.clip(np.asarray(preds, float), 1e-15, 1 - 1e-15)
        return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    if kind == "auc":
        y = _binary_truth(truth)
        s = np.asarray(preds, float)
        pos = s[y == 1.0]
        neg = s[y == 0.0]
        if len(pos) == 0 or len(neg) == 0:
            raise Degenerate("auc needs at least one positive and one negative")
        concordant = tied = 0.0
        for sp in pos:
            concordant += float(np.sum(sp > neg))
            tied += float(np.sum(sp == neg))
        return (concordant + 0.5 * tied) / (len(pos) * len(neg))
    raise ValueError(f"unknown metric {kind!r}")


def kfold_cv(spec: ModelSpec, table: Table, target: str, k: int,
             metric_kind: str, seed: int) -> tuple[float, float, list[float]]:
    """Seeded shuffle, contiguous folds with sizes differing by at most 1;
    each fold once as validation. Returns (mean, population std, scores)."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if table.n_rows < k:
        raise TooFewRows(f"{table.n_rows} rows < {k} folds")
    perm = shuffled_indices(table.n_rows, seed).tolist()
    base, rem = divmod(table.n_rows, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < rem else 0)
        folds.append(perm[start:start + size])
        start += size
    scores = []
    for i in range(k):
        valid_idx = folds[i]
        train_idx = [j for f, fold in enumerate(folds) if f != i for j in fold]
        tr = _take_rows(table, train_idx, f"{table.name}_cvtr")
        va = _take_rows(table, valid_idx, f"{table.name}_cvva")
        model = train(spec, tr, target)
        preds = predict(model, va)
        scores.append(metric(metric_kind, list(va.column(target).values), preds))
    arr = np.asarray(scores)
    return float(arr.mean()), float(np.sqrt(np.mean((arr - arr.mean()) ** 2))), scores


def holdout_score(spec: ModelSpec, table: Table, target: str,
                  metric_kind: str, seed: int, ratio: float = 0.8) -> float:
    from ..data_toolkit import split

    tr, va = split(table, ratio, seed, names=("tr", "va"))
    model = train(spec, tr, target)
    preds = predict(model, va)
    return metric(metric_kind, list(va.column(target).values), preds)
