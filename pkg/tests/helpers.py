"""Shared generators and property checks used across the test modules.

The randomized property suites live here so the acceptance tests can run
the exact same checks at their required repetition counts.
"""

from __future__ import annotations

import numpy as np

from moso_kit.embedding import build_plan, embed, extract
from moso_kit.problem import DesignVariable


def random_mixed_space(rng, max_vars: int = 5):
    """Draw a random tuple of design variables covering all kinds."""
    n = rng.integers(1, max_vars + 1)
    variables = []
    for i in range(n):
        kind = rng.choice(["continuous", "integer", "categorical"])
        name = f"v{i}"
        if kind == "continuous":
            lo = float(rng.uniform(-10, 10))
            hi = lo + float(rng.uniform(0.5, 20))
            variables.append(DesignVariable(name, "continuous", lower=lo, upper=hi))
        elif kind == "integer":
            lo = int(rng.integers(-20, 20))
            hi = lo + int(rng.integers(1, 30))
            variables.append(DesignVariable(name, "integer", lower=lo, upper=hi))
        else:
            k = int(rng.integers(2, 5))
            levels = tuple(f"L{j}" for j in range(k))
            variables.append(DesignVariable(name, "categorical", levels=levels))
    return tuple(variables)


def random_design(rng, variables):
    """Draw a legal design point for the given variables."""
    x = {}
    for v in variables:
        if v.kind == "continuous":
            x[v.name] = float(rng.uniform(v.lower, v.upper))
        elif v.kind == "integer":
            x[v.name] = int(rng.integers(v.lower, v.upper + 1))
        else:
            x[v.name] = v.levels[rng.integers(len(v.levels))]
    return x


def check_round_trip_and_exclusivity(rng) -> None:
    """One randomized round-trip plus categorical block exclusivity check."""
    variables = random_mixed_space(rng)
    plan = build_plan(variables)
    x = random_design(rng, variables)
    z = embed(plan, x)
    assert z.shape == (plan.latent_dim,)
    assert (z >= 0).all() and (z <= 1).all()

    back = extract(plan, z)
    for v in variables:
        if v.kind == "continuous":
            width = v.upper - v.lower
            assert abs(back[v.name] - x[v.name]) <= 1e-9 * max(1.0, width)
        else:
            assert back[v.name] == x[v.name]

    if plan.combo_count:
        block = z[plan.categorical_offset:]
        # joint encoding: all zeros, or exactly one coordinate set to 1
        nonzero = np.flatnonzero(block)
        assert len(nonzero) <= 1
        if len(nonzero) == 1:
            assert block[nonzero[0]] == 1.0


def brute_force_nondominated(points: np.ndarray) -> list[int]:
    """Quadratic-time dominance filter used as the metrics oracle."""
    keep = []
    seen = set()
    for i, p in enumerate(points):
        key = p.tobytes()
        if key in seen:
            continue
        dominated = False
        for j, q in enumerate(points):
            if i == j:
                continue
            if np.all(q <= p) and np.any(q < p):
                dominated = True
                break
        if not dominated:
            keep.append(i)
            seen.add(key)
    return keep
