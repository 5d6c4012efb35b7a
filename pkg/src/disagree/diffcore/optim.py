from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from .tape import NonFiniteError
from .tree import tree_leaves, tree_unflatten

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int = 0


def adam_init(params: Any) -> AdamState:
    leaves = tree_leaves(params)
    zeros = tuple(np.zeros_like(p) for p in leaves)
    return AdamState(zeros, tuple(np.zeros_like(p) for p in leaves), 0)


def adam_step(params: Any, grads: Any, state: AdamState | None, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> tuple[Any, AdamState]:
    """One bias-corrected Adam step; returns new params and state.

    Raises NonFiniteError (after logging the step index) if any gradient is
    not finite; the inputs are left untouched in that case.
    """
    if state is None:
        state = adam_init(params)
    p_leaves = tree_leaves(params)
    g_leaves = tree_leaves(grads)
    if len(p_leaves) != len(g_leaves):
        raise ValueError("gradient structure does not match parameters")
    for p, g in zip(p_leaves, g_leaves):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.isfinite(g).all():
            log.error("adam step %d rejected: non-finite gradient", state.t + 1)
            raise NonFiniteError(f"non-finite gradient at adam step {state.t + 1}")
    t = state.t + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m_old, v_old in zip(p_leaves, g_leaves, state.m, state.v):
        # fresh arrays for m, v and p; the in-place ops below only touch those
        m = g * (1.0 - beta1)
        m += beta1 * m_old
        v = g * g
        v *= 1.0 - beta2
        v += beta2 * v_old
        denom = np.sqrt(v)
        denom *= 1.0 / np.sqrt(c2)
        denom += eps
        update = m / denom
        update *= lr / c1
        new_p.append(p - update)
        new_m.append(m)
        new_v.append(v)
    return tree_unflatten(params, new_p), AdamState(tuple(new_m), tuple(new_v), t)


class Adam:
    """Stateful wrapper around :func:`adam_step` for one parameter set."""

    def __init__(self, lr: float, state: AdamState | None = None):
        self.lr = lr
        self.state = state

    def step(self, params, grads):
        params, self.state = adam_step(params, grads, self.state, self.lr)
        return params


class Sgd:
    """Plain gradient descent, no moments."""

    def __init__(self, lr: float):
        self.lr = lr
        self.t = 0

    def step(self, params, grads):
        g_leaves = tree_leaves(grads)
        self.t += 1
        for g in g_leaves:
            if not np.isfinite(g).all():
                log.error("sgd step %d rejected: non-finite gradient", self.t)
                raise NonFiniteError(f"non-finite gradient at sgd step {self.t}")
        new = [p - self.lr * g for p, g in zip(tree_leaves(params), g_leaves)]
        return tree_unflatten(params, new)
