"""Minimal reverse-mode autodiff used by every model in the package."""

from . import ops
from .checkpoint import load_bundle, load_params, save_bundle, save_params
from .gradcheck import GradCheckReport, check_gradient, numeric_gradient, tape_gradient
from .mlp import Layer, MlpParams, forward, init_mlp
from .optim import Adam, AdamState, Sgd, adam_init, adam_step
from .tape import Gradients, Node, NonFiniteError, ShapeError, Tape, value_of
from .tree import tree_leaves, tree_map, tree_unflatten


def backward(tape: Tape, output: Node) -> Gradients:
    return tape.backward(output)


__all__ = [
    "Adam", "AdamState", "GradCheckReport", "Gradients", "Layer", "MlpParams", "Node",
    "NonFiniteError", "Sgd", "ShapeError", "Tape", "adam_init", "adam_step", "backward",
    "check_gradient", "forward", "init_mlp", "load_bundle", "load_params", "numeric_gradient",
    "ops", "save_bundle", "save_params", "tape_gradient", "tree_leaves", "tree_map",
    "tree_unflatten", "value_of",
]
