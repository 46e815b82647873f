"""Deterministic random numbers.

All stochastic operations (splits, CV shuffles, hyperparameter sampling,
synthetic data generation) draw from numpy's PCG64 generator seeded with a
64-bit integer. PCG64 is fixed across platforms and numpy releases, which
is what makes seeded runs reproducible everywhere.
"""

from __future__ import annotations

import numpy as np

PRNG_NAME = "numpy PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def shuffled_indices(n: int, seed: int) -> np.ndarray:
    """Permutation of range(n), fully determined by the seed."""
    return make_rng(seed).permutation(n)
