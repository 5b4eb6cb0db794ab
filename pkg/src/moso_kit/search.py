"""Space-filling global search over the latent cube."""

from __future__ import annotations

import numpy as np


def lhs_search(n_points: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Jittered Latin hypercube sample of the unit cube.

    Each coordinate independently permutes the ``n_points`` equal strata
    and draws uniformly within each stratum, so every one-dimensional
    histogram with ``n_points`` bins has exactly one sample per bin.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    sample = np.empty((n_points, dim))
    for d in range(dim):
        strata = rng.permutation(n_points)
        sample[:, d] = (strata + rng.random(n_points)) / n_points
    return sample
