"""Hyperparameter search: random search and successive halving.

Both samplers draw from the shared seeded PRNG, so (seed, space, budget)
fully determine the candidate sequence. Successive halving uses a
training-subset fraction as its resource axis so it applies uniformly to
closed-form learners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import BadConfig, DuetError
from ..rng import make_rng
from .models import ModelSpec


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("need 0 < lo < hi")


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("need at least one choice")


@dataclass(frozen=True)
class SearchSpace:
    family: str
    dims: dict  # name -> Uniform | LogUniform | IntRange | Choice


@dataclass
class TuneResult:
    best: ModelSpec
    best_score: float
    history: list  # (spec, score, resource_fraction)
    seed: int
    metric: str
    direction: str


def _sample_spec(space: SearchSpace, rng) -> ModelSpec:
    hp = {}
    for name, dim in space.dims.items():
        if isinstance(dim, Uniform):
            hp[name] = float(rng.uniform(dim.lo, dim.hi))
        elif isinstance(dim, LogUniform):
            hp[name] = float(math.exp(rng.uniform(math.log(dim.lo),
                                                  math.log(dim.hi))))
        elif isinstance(dim, IntRange):
            hp[name] = int(rng.integers(dim.lo, dim.hi + 1))
        elif isinstance(dim, Choice):
            hp[name] = dim.values[int(rng.integers(0, len(dim.values)))]
        else:
            raise ValueError(f"unknown dimension {dim!r}")
    return ModelSpec(space.family, hp)


def sample_specs(space: SearchSpace, n: int, seed: int) -> list[ModelSpec]:
    rng = make_rng(seed)
    return [_sample_spec(space, rng) for _ in range(n)]


def _better(a: float, b: float, direction: str) -> bool:
    return a < b if direction == "minimize" else a > b


def _annotate(exc: Exception, spec: ModelSpec) -> Exception:
    if isinstance(exc, DuetError):
        return type(exc)(f"{exc} (while evaluating {spec.to_json()})",
                         code=exc.code)
    return exc


def random_search(space: SearchSpace, budget: int, evaluate, seed: int,
                  metric: str, direction: str) -> TuneResult:
    """Evaluate ``budget`` i.i.d. samples at full resource; ties to the
    earliest."""
    if budget < 1:
        raise BadConfig("budget must be >= 1")
    specs = sample_specs(space, budget, seed)
    history = []
    best_i = None
    for i, spec in enumerate(specs):
        try:
            score = evaluate(spec)
        except DuetError as exc:
            raise _annotate(exc, spec) from exc
        history.append((spec, score, 1.0))
        if best_i is None or _better(score, history[best_i][1], direction):
            best_i = i
    return TuneResult(best=history[best_i][0], best_score=history[best_i][1],
                      history=history, seed=seed, metric=metric,
                      direction=direction)


def successive_halving(space: SearchSpace, n_initial: int, evaluate,
                       seed: int, metric: str, direction: str,
                       eta: int = 2) -> TuneResult:
    """Rung r evaluates survivors at resource fraction
    min(1, eta^r / eta^R) with R = floor(log_eta n_initial); the best
    ceil(n_r/eta) survive (ties to earliest). Terminates once a survivor
    has been evaluated at fraction 1.0.

    ``evaluate(spec, resource_fraction)`` is expected to train on the
    first ceil(fraction*n) rows of a seed-shuffled training split.
    """
    if eta < 2:
        raise BadConfig("eta must be >= 2")
    if n_initial < eta:
        raise BadConfig(f"n_initial={n_initial} < eta={eta}")
    big_r = int(math.floor(math.log(n_initial, eta)))
    specs = sample_specs(space, n_initial, seed)
    # survivors carry their original sampling index for tie-breaking
    survivors = list(enumerate(specs))
    history = []
    full_runs = []  # (orig_index, spec, score) at fraction 1.0
    r = 0
    while True:
        fraction = min(1.0, eta ** r / eta ** big_r)
        scored = []
        for orig_i, spec in survivors:
            try:
                score = evaluate(spec, fraction)
            except DuetError as exc:
                raise _annotate(exc, spec) from exc
            history.append((spec, score, fraction))
            scored.append((orig_i, spec, score))
            if fraction == 1.0:
                full_runs.append((orig_i, spec, score))
        if fraction == 1.0:
            break
        keep = math.ceil(len(scored) / eta)
        sign = 1.0 if direction == "minimize" else -1.0
        scored.sort(key=lambda t: (sign * t[2], t[0]))
        survivors = [(i, s) for i, s, _ in scored[:keep]]
        r += 1
    best_i, best_spec, best_score = full_runs[0]
    for i, s, sc in full_runs[1:]:
        if _better(sc, best_score, direction):
            best_i, best_spec, best_score = i, s, sc
    return TuneResult(best=best_spec, best_score=best_score, history=history,
                      seed=seed, metric=metric, direction=direction)
