from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import ops
from .tape import ShapeError, value_of

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class Layer:
    weight: Any  # (fan_in, fan_out)
    bias: Any  # (fan_out,)
    activation: str = "identity"


@dataclass(frozen=True)
class MlpParams:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {layer.activation!r}")
        for i in range(1, len(self.layers)):
            prev = value_of(self.layers[i - 1].weight).shape[1]
            cur = value_of(self.layers[i].weight).shape[0]
            if prev != cur:
                raise ShapeError(f"layer {i} expects {cur} inputs but layer {i - 1} emits {prev}")

    @property
    def fan_in(self) -> int:
        return value_of(self.layers[0].weight).shape[0]

    @property
    def fan_out(self) -> int:
        return value_of(self.layers[-1].weight).shape[1]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.fan_in,) + tuple(value_of(l.weight).shape[1] for l in self.layers)


def init_mlp(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return MlpParams(tuple(layers))


def _activate(x, kind: str):
    if kind == "relu":
        return ops.relu(x)
    if kind == "tanh":
        return ops.tanh(x)
    return x


def forward(params: MlpParams, x: Any, hidden_masks: Sequence[Any] | None = None):
    """Evaluate the network on ``x`` of shape (..., fan_in).

    ``hidden_masks`` optionally multiplies each hidden activation (not the
    output layer); dropout passes supply pre-scaled keep masks here.
    """
    xv = value_of(x)
    if xv.ndim == 0 or xv.shape[-1] != params.fan_in:
        raise ShapeError(f"input shape {xv.shape} does not end in fan_in={params.fan_in}")
    n_hidden = len(params.layers) - 1
    if hidden_masks is not None and len(hidden_masks) != n_hidden:
        raise ValueError(f"expected {n_hidden} hidden masks, got {len(hidden_masks)}")
    h = x
    for i, layer in enumerate(params.layers):
        h = _activate(ops.affine(h, layer.weight, layer.bias), layer.activation)
        if hidden_masks is not None and i < n_hidden:
            h = ops.mul(h, hidden_masks[i])
    return h
