"""Seeded synthetic datasets bundled with the package.

Two 500-row tables, split 400/100 into train/test:

* regression: three standard-normal features; the target is a fixed linear
  combination (4 + 3*x1 - 2*x2 + 0.5*x3) plus Gaussian noise with sigma
  0.5. Three percent of train x3 cells are blanked so the processing stage
  has real work.
* binary classification: two informative features (logit 2.2*f1 - 1.8*f2
  + 0.3 through a sigmoid, Bernoulli labels) and three pure-noise
  features; three percent of train n1 cells are blanked.

Everything is drawn from numpy PCG64 with fixed seeds, so regenerating
the bundled CSV assets reproduces them byte for byte.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from . import data_toolkit as dt
from .rng import make_rng

REG_SEED = 11
CLF_SEED = 13
N_ROWS = 500
TRAIN_ROWS = 400
REG_NOISE_SIGMA = 0.5
MISSING_FRACTION = 0.03

ASSET_NAMES = (
    "reg_train.csv", "reg_test.csv", "clf_train.csv", "clf_test.csv",
)


def _column(name: str, values) -> dt.Column:
    vals = tuple(None if v is None else float(v) for v in values)
    return dt.Column(name, dt.CType.NUMERIC, vals)


def _blank_some(values: np.ndarray, rng, fraction: float) -> list:
    out = [float(v) for v in values]
    count = int(round(fraction * len(out)))
    for i in rng.choice(len(out), size=count, replace=False):
        out[i] = None
    return out


def synthetic_regression(seed: int = REG_SEED,
                         n_rows: int = N_ROWS) -> tuple[dt.Table, dt.Table]:
    rng = make_rng(seed)
    x1 = rng.normal(size=n_rows)
    x2 = rng.normal(size=n_rows)
    x3 = rng.normal(size=n_rows)
    noise = rng.normal(scale=REG_NOISE_SIGMA, size=n_rows)
    y = 4.0 + 3.0 * x1 - 2.0 * x2 + 0.5 * x3 + noise

    split = TRAIN_ROWS * n_rows // N_ROWS
    x3_train = _blank_some(x3[:split], rng, MISSING_FRACTION)
    train = dt.Table("train", (
        _column("x1", x1[:split]), _column("x2", x2[:split]),
        dt.Column("x3", dt.CType.NUMERIC, tuple(x3_train)),
        _column("y", y[:split]),
    ), n_rows=split)
    test = dt.Table("test", (
        _column("x1", x1[split:]), _column("x2", x2[split:]),
        _column("x3", x3[split:]), _column("y", y[split:]),
    ), n_rows=n_rows - split)
    return train, test


def synthetic_classification(seed: int = CLF_SEED,
                             n_rows: int = N_ROWS) -> tuple[dt.Table, dt.Table]:
    rng = make_rng(seed)
    f1 = rng.normal(size=n_rows)
    f2 = rng.normal(size=n_rows)
    noise_cols = [rng.normal(size=n_rows) for _ in range(3)]
    logit = 2.2 * f1 - 1.8 * f2 + 0.3
    p = 1.0 / (1.0 + np.exp(-logit))
    label = (rng.random(n_rows) < p).astype(float)

    split = TRAIN_ROWS * n_rows // N_ROWS
    n1_train = _blank_some(noise_cols[0][:split], rng, MISSING_FRACTION)
    train = dt.Table("train", (
        _column("f1", f1[:split]), _column("f2", f2[:split]),
        dt.Column("n1", dt.CType.NUMERIC, tuple(n1_train)),
        _column("n2", noise_cols[1][:split]),
        _column("n3", noise_cols[2][:split]),
        _column("label", label[:split]),
    ), n_rows=split)
    test = dt.Table("test", (
        _column("f1", f1[split:]), _column("f2", f2[split:]),
        _column("n1", noise_cols[0][split:]),
        _column("n2", noise_cols[1][split:]),
        _column("n3", noise_cols[2][split:]),
        _column("label", label[split:]),
    ), n_rows=n_rows - split)
    return train, test


def generate_assets() -> dict[str, str]:
    """Asset file name -> CSV text, regenerated from the fixed seeds."""
    reg_train, reg_test = synthetic_regression()
    clf_train, clf_test = synthetic_classification()
    return {
        "reg_train.csv": dt.to_csv(reg_train),
        "reg_test.csv": dt.to_csv(reg_test),
        "clf_train.csv": dt.to_csv(clf_train),
        "clf_test.csv": dt.to_csv(clf_test),
    }


def write_assets(directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in generate_assets().items():
        (directory / name).write_text(text, encoding="utf-8")


def asset_path(name: str) -> Path:
    """Path to a bundled asset file."""
    path = Path(str(resources.files("duetml") / "assets" / name))
    if not path.exists():
        raise FileNotFoundError(f"no bundled asset {name!r}")
    return path


def asset_text(name: str) -> str:
    return asset_path(name).read_text(encoding="utf-8")
