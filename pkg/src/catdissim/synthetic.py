"""Small synthetic classification table used by the tests and the CLI demo."""
from __future__ import annotations

import numpy as np

from .dataset import CategoricalDataset, VariableSchema


def make_classification(
    n: int = 500,
    n_classes: int = 3,
    n_informative: int = 2,
    n_noise: int = 2,
    noise: float = 0.05,
    noise_levels: int = 3,
    seed: int = 0,
) -> tuple[CategoricalDataset, list[str]]:
    """Rows with ``n_informative`` predictors equal to the class (each replaced
    by a different uniformly drawn level with probability ``noise``) and
    ``n_noise`` predictors uniform over ``noise_levels`` levels."""
    rng = np.random.default_rng(seed)
    y = rng.integers(n_classes, size=n)
    cols, variables = [], []
    for j in range(n_informative):
        x = y.copy()
        flip = rng.random(n) < noise
        x[flip] = (y[flip] + rng.integers(1, n_classes, size=int(flip.sum()))) % n_classes
        cols.append(x)
        variables.append(VariableSchema(f"inf{j + 1}", tuple(f"l{c}" for c in range(n_classes))))
    for j in range(n_noise):
        cols.append(rng.integers(noise_levels, size=n))
        variables.append(VariableSchema(f"noise{j + 1}", tuple(f"l{c}" for c in range(noise_levels))))
    ds = CategoricalDataset(tuple(variables), np.column_stack(cols))
    return ds, [f"c{c}" for c in y]
