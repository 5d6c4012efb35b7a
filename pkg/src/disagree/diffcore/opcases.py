"""One small gradient-check case per registered op kind.

Shared by the test suite and ``disagree selftest``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import ops
from .gradcheck import numeric_gradient, relative_error, tape_gradient


def op_case(kind: str, rng: np.random.Generator) -> tuple[Callable, list[np.ndarray], Callable]:
    """(function, initial arrays, finite-difference reference) for one op kind.

    The reference equals the function except for stop_gradient, whose
    reference treats the stopped operand as the constant it is declared to be.
    """
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 2))
    bias = rng.normal(size=2)
    proj = rng.normal(size=(3, 4))
    if kind == "affine":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.affine(p[0], p[1], p[2]), proj[:, :2])), [a, w, bias]
    elif kind == "relu":
        # keep pre-activations away from the kink
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.relu(p[0]), proj)), [a + np.sign(a) * 0.05]
    elif kind == "tanh":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.tanh(p[0]), proj)), [a]
    elif kind == "softmax":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.softmax(p[0]), proj)), [a]
    elif kind == "log":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.log(p[0]), proj)), [np.abs(a) + 0.5]
    elif kind == "add":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.add(p[0], p[1]), proj)), [a, b[0]]
    elif kind == "sub":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.sub(p[0], p[1]), proj)), [a, b]
    elif kind == "mul":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.mul(p[0], p[1]), proj)), [a, b]
    elif kind == "sq_norm":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.sq_norm(p[0]), proj[:, 0])), [a]
    elif kind == "reduce_sum":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.reduce_sum(p[0], axis=0), proj[0])), [a]
    elif kind == "reduce_mean":
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.reduce_mean(p[0], axis=1), proj[:, 0])), [a]
    elif kind == "concat":
        stacked = np.vstack([proj, proj])
        fn, params = lambda p: ops.reduce_sum(ops.mul(ops.concat([p[0], p[1]], axis=0), stacked)), [a, b]
    elif kind == "stop_gradient":
        return (lambda p: ops.reduce_sum(ops.mul(ops.stop_gradient(p[0]), p[1])), [a, b],
                lambda p: ops.reduce_sum(ops.mul(a, p[1])))
    else:
        raise ValueError(f"no gradient-check case for op kind {kind!r}")
    return fn, params, fn


def op_max_rel_error(kind: str, rng: np.random.Generator) -> float:
    fn, params, reference = op_case(kind, rng)
    _, analytic = tape_gradient(fn, params)
    numeric = numeric_gradient(reference, params)
    return max(float(relative_error(a, n).max()) for a, n in zip(analytic, numeric))
