"""Reverse-mode differentiation over float64 numpy arrays.

A :class:`Tape` records every operation whose inputs include one of its
:class:`Node` objects. Operations on plain arrays run the very same forward
kernels without recording anything, so a traced and an untraced evaluation
produce bit-identical values.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Array = np.ndarray
VJP = Callable[[Array], Array]


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


class ShapeError(ValueError):
    """Raised on incompatible operand shapes."""


class Node:
    """One recorded value on a tape."""

    __slots__ = ("tape", "id", "op", "inputs", "value", "vjps")

    def __init__(self, tape: "Tape", id: int, op: str, inputs: tuple[int, ...],
                 value: Array, vjps: tuple[VJP, ...]):
        self.tape = tape
        self.id = id
        self.op = op
        self.inputs = inputs
        self.value = value
        self.vjps = vjps

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node(id={self.id}, op={self.op!r}, shape={self.shape})"

    # operator sugar, all routed through the op set
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)


class Gradients:
    """Gradient lookup returned by :meth:`Tape.backward`."""

    def __init__(self, grads: dict[int, Array]):
        self._grads = grads

    def of(self, node: Node) -> Array:
        g = self._grads.get(node.id)
        if g is None:
            return np.zeros_like(node.value)
        return g

    def __contains__(self, node: Node) -> bool:
        return node.id in self._grads


class Tape:
    """Single-writer record of traced operations.

    Node ids are creation indices, so inputs always precede outputs.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def variable(self, value: Any) -> Node:
        arr = np.array(value, dtype=np.float64)
        return self._push("leaf", (), arr, ())

    def watch(self, tree: Any) -> Any:
        """Return ``tree`` with every array leaf replaced by a tape variable."""
        from .tree import tree_map
        return tree_map(self.variable, tree)

    def _push(self, op: str, inputs: tuple[int, ...], value: Array,
              vjps: tuple[VJP, ...]) -> Node:
        node = Node(self, len(self.nodes), op, inputs, value, vjps)
        self.nodes.append(node)
        return node

    def backward(self, output: Node) -> Gradients:
        if not isinstance(output, Node) or output.tape is not self:
            raise ValueError("output is not a node of this tape")
        if output.value.size != 1:
            raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
        grads: dict[int, Array] = {output.id: np.ones_like(output.value)}
        for node in reversed(self.nodes[: output.id + 1]):
            g = grads.get(node.id)
            if g is None or not node.inputs:
                continue
            for inp, vjp in zip(node.inputs, node.vjps):
                contrib = vjp(g)
                prev = grads.get(inp)
                grads[inp] = contrib if prev is None else prev + contrib
        return Gradients(grads)

    def grad(self, output: Node, wrt: Any) -> Any:
        """Gradients of ``output`` for every node leaf of ``wrt``, same structure."""
        from .tree import tree_map
        grads = self.backward(output)
        return tree_map(grads.of, wrt, is_leaf=lambda x: isinstance(x, Node))


def find_tape(values: Sequence[Any]) -> Tape | None:
    tape = None
    for v in values:
        if isinstance(v, Node):
            if tape is None:
                tape = v.tape
            elif v.tape is not tape:
                raise ValueError("operands belong to different tapes")
    return tape


def value_of(x: Any) -> Array:
    if isinstance(x, Node):
        return x.value
    if isinstance(x, np.ndarray):
        return x
    return np.asarray(x, dtype=np.float64)


def record(op: str, inputs: Sequence[Any], value: Array,
           vjps: Sequence[VJP | None]) -> Array | Node:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"{op} produced a non-finite value")
    tape = find_tape(inputs)
    if tape is None:
        return value
    ids, rules = [], []
    for inp, vjp in zip(inputs, vjps):
        if isinstance(inp, Node) and vjp is not None:
            ids.append(inp.id)
            rules.append(vjp)
    return tape._push(op, tuple(ids), value, tuple(rules))
