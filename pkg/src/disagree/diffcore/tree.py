"""Structure-preserving maps over parameter containers.

Leaves are numpy arrays and tape nodes; dataclasses, lists, tuples and dicts
are traversed; everything else (activation tags, ints) is carried through.
"""

from __future__ import annotations

import dataclasses
import functools
from typing import Any, Callable

import numpy as np

from .tape import Node


def _default_leaf(x: Any) -> bool:
    return isinstance(x, (np.ndarray, Node))


@functools.lru_cache(maxsize=None)
def _field_names(cls: type) -> tuple[str, ...]:
    return tuple(f.name for f in dataclasses.fields(cls))


def _is_instance_dataclass(x: Any) -> bool:
    return dataclasses.is_dataclass(x) and not isinstance(x, type)


def tree_map(fn: Callable, tree: Any, *rest: Any, is_leaf: Callable[[Any], bool] | None = None) -> Any:
    leaf = is_leaf or _default_leaf
    if leaf(tree):
        return fn(tree, *rest)
    if _is_instance_dataclass(tree):
        changes = {
            name: tree_map(fn, getattr(tree, name), *(getattr(r, name) for r in rest), is_leaf=leaf)
            for name in _field_names(type(tree))
        }
        return dataclasses.replace(tree, **changes)
    if isinstance(tree, (list, tuple)):
        out = [tree_map(fn, t, *(r[i] for r in rest), is_leaf=leaf) for i, t in enumerate(tree)]
        return type(tree)(out)
    if isinstance(tree, dict):
        return {k: tree_map(fn, v, *(r[k] for r in rest), is_leaf=leaf) for k, v in tree.items()}
    return tree


def tree_leaves(tree: Any, is_leaf: Callable[[Any], bool] | None = None) -> list[Any]:
    """Leaves in the same order :func:`tree_map` visits them."""
    leaf = is_leaf or _default_leaf
    out: list[Any] = []

    def collect(x):
        if leaf(x):
            out.append(x)
        elif _is_instance_dataclass(x):
            for name in _field_names(type(x)):
                collect(getattr(x, name))
        elif isinstance(x, (list, tuple)):
            for t in x:
                collect(t)
        elif isinstance(x, dict):
            for v in x.values():
                collect(v)

    collect(tree)
    return out


def tree_unflatten(tree: Any, leaves: list[Any]) -> Any:
    it = iter(leaves)
    result = tree_map(lambda _: next(it), tree)
    try:
        next(it)
    except StopIteration:
        return result
    raise ValueError("too many leaves for tree")
