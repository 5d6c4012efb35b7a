"""Brute-force reference for the disagreement reward.

Written independently of :mod:`rewards`: plain Python loops, a two-pass
mean-then-variance per feature dimension, no numpy reductions.
"""

from __future__ import annotations

import numpy as np

from .rewards import disagreement_reward


def brute_force_disagreement(predictions) -> float:
    """Population variance across members, per dimension, summed over dimensions."""
    members = [[float(v) for v in np.asarray(p).reshape(-1)] for p in predictions]
    k = len(members)
    if k < 2:
        raise ValueError("need at least 2 members")
    total = 0.0
    for j in range(len(members[0])):
        mean = 0.0
        for m in members:
            mean += m[j]
        mean /= k
        var = 0.0
        for m in members:
            var += (m[j] - mean) ** 2
        total += var / k
    return total


def random_predictions(rng: np.random.Generator, k: int, dim: int) -> list[np.ndarray]:
    """Members around a shared random centre with a random spread, as trained ensembles look."""
    centre = rng.normal(size=dim) * rng.uniform(0.1, 10.0)
    spread = 10.0 ** rng.uniform(-3, 1)
    return [centre + spread * rng.normal(size=dim) for _ in range(k)]


def compare_once(rng: np.random.Generator, k: int, dim: int) -> tuple[float, float, float]:
    """(library value, brute-force value, value after a random member permutation)."""
    preds = random_predictions(rng, k, dim)
    lib = float(disagreement_reward(preds))
    perm = [preds[i] for i in rng.permutation(k)]
    return lib, brute_force_disagreement(preds), float(disagreement_reward(perm))
