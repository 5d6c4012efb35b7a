from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .tape import Node, Tape, value_of
from .tree import tree_leaves, tree_unflatten


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def tape_gradient(f: Callable[[Any], Any], params: Any) -> tuple[float, list[np.ndarray]]:
    tape = Tape()
    watched = tape.watch(params)
    out = f(watched)
    if not isinstance(out, Node):
        # output does not depend on any parameter
        return float(value_of(out)), [np.zeros_like(p) for p in tree_leaves(params)]
    grads = tape.backward(out)
    return float(out.value), [grads.of(n) for n in tree_leaves(watched)]


def numeric_gradient(f: Callable[[Any], Any], params: Any, h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences, one coordinate at a time."""
    leaves = [np.array(p, dtype=np.float64) for p in tree_leaves(params)]
    out = []
    for leaf in leaves:
        g = np.zeros_like(leaf)
        flat = leaf.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(value_of(f(tree_unflatten(params, leaves))))
            flat[i] = orig - h
            down = float(value_of(f(tree_unflatten(params, leaves))))
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def check_gradient(f: Callable[[Any], Any], params: Any, tolerance: float = 1e-4,
                   h: float = 1e-5, floor: float = 1e-6) -> GradCheckReport:
    """Compare tape gradients of scalar ``f`` against central differences.

    ``f`` must accept ``params`` either as arrays or as tape nodes. Relative
    errors use ``max(|a|, |b|, floor)`` as denominator so that vanishing
    gradients are judged on absolute error.
    """
    _, analytic = tape_gradient(f, params)
    numeric = numeric_gradient(f, params, h)
    worst = 0.0
    checked = 0
    for a, n in zip(analytic, numeric):
        if a.size:
            worst = max(worst, float(relative_error(a, n, floor).max()))
        checked += a.size
    return GradCheckReport(worst, tolerance, checked)
