"""Observation encoders: the space in which forward models predict."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import MlpParams, ShapeError, forward, init_mlp, ops, value_of
from .diffcore.mlp import Layer
from .rng import stream

ENCODER_KINDS = ("identity", "random-net")


def freeze_params(params: MlpParams) -> MlpParams:
    layers = []
    for layer in params.layers:
        w = np.array(layer.weight, dtype=np.float64)
        b = np.array(layer.bias, dtype=np.float64)
        w.setflags(write=False)
        b.setflags(write=False)
        layers.append(Layer(w, b, layer.activation))
    return MlpParams(tuple(layers))


@dataclass(frozen=True)
class FeatureEncoder:
    kind: str
    d_in: int
    d_feat: int
    params: MlpParams | None = None

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder {self.kind!r}; known: {', '.join(ENCODER_KINDS)}")
        if self.kind == "identity" and self.d_feat != self.d_in:
            raise ValueError("identity encoder needs d_feat == d_in")
        if self.kind == "random-net" and self.params is None:
            raise ValueError("random-net encoder needs parameters")

    def encode(self, obs) -> np.ndarray:
        """Map observations (..., d_in) to features (..., d_feat).

        The result is always a plain array: no gradient flows into the
        frozen encoder.
        """
        x = value_of(ops.stop_gradient(obs))
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"encoder expects {self.d_in}-dim observations, got {x.shape}")
        if self.kind == "identity":
            return x
        return forward(self.params, x)

    def lipschitz_bound(self) -> float:
        """Product of layer spectral norms (relu is 1-Lipschitz)."""
        if self.kind == "identity":
            return 1.0
        return float(np.prod([np.linalg.norm(l.weight, 2) for l in self.params.layers]))


def make_encoder(kind: str, d_in: int, d_feat: int = 32, hidden: int = 64, seed: int = 0) -> FeatureEncoder:
    if kind == "identity":
        return FeatureEncoder("identity", d_in, d_in)
    if kind == "random-net":
        params = init_mlp([d_in, hidden, d_feat], ["relu", "identity"], stream(seed, "encoder"))
        return FeatureEncoder("random-net", d_in, d_feat, freeze_params(params))
    raise ValueError(f"unknown encoder {kind!r}; known: {', '.join(ENCODER_KINDS)}")


def encode(enc: FeatureEncoder, obs) -> np.ndarray:
    return enc.encode(obs)
