"""Intrinsic reward signals computed from forward-model predictions.

All functions accept arrays or tape nodes of shape (..., d) per member and
return one non-negative value per leading index.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from ..diffcore import MlpParams, ShapeError, forward, ops, value_of
from .models import model_input

REWARD_KINDS = ("disagreement", "pred-error", "pred-error-variance", "dropout-disagreement")


def _check_members(predictions: Sequence[Any], minimum: int) -> None:
    if len(predictions) < minimum:
        raise ValueError(f"need at least {minimum} predictions, got {len(predictions)}")
    shapes = {value_of(p).shape for p in predictions}
    if len(shapes) != 1:
        raise ShapeError(f"predictions disagree in shape: {sorted(shapes)}")


def ensemble_mean(predictions: Sequence[Any]):
    """Mean prediction, accumulated as offsets from the first member.

    Identical members therefore yield exactly the member itself, so the
    disagreement (and its gradient) is exactly zero in that case.
    """
    first = predictions[0]
    if len(predictions) == 1:
        return first
    offset = None
    for p in predictions[1:]:
        d = ops.sub(p, first)
        offset = d if offset is None else ops.add(offset, d)
    return ops.add(first, ops.mul(offset, 1.0 / len(predictions)))


def disagreement_reward(predictions: Sequence[Any]):
    """Mean squared distance of each member's prediction from the ensemble mean.

    Equals the population variance per feature, summed over features. There
    is deliberately no next-state argument.
    """
    _check_members(predictions, 2)
    mean = ensemble_mean(predictions)
    total = None
    for p in predictions:
        d = ops.sq_norm(ops.sub(p, mean))
        total = d if total is None else ops.add(total, d)
    return ops.mul(total, 1.0 / len(predictions))


def _target_check(predictions, target):
    if value_of(predictions[0]).shape[-1] != value_of(target).shape[-1]:
        raise ShapeError(
            f"prediction dim {value_of(predictions[0]).shape[-1]} != target dim {value_of(target).shape[-1]}"
        )


def member_errors(predictions: Sequence[Any], target) -> np.ndarray:
    """Squared error of every member, stacked on a leading axis."""
    t = value_of(target)
    return np.stack([np.sum((value_of(p) - t) ** 2, axis=-1) for p in predictions])


def prediction_error_reward(predictions: Sequence[Any], target) -> np.ndarray:
    """Squared prediction error averaged over members (curiosity baseline)."""
    _check_members(predictions, 1)
    _target_check(predictions, target)
    return member_errors(predictions, target).mean(axis=0)


def pred_error_variance_reward(predictions: Sequence[Any], target) -> np.ndarray:
    """Population variance across members of their squared errors."""
    _check_members(predictions, 2)
    _target_check(predictions, target)
    return member_errors(predictions, target).var(axis=0)


def dropout_masks(shape: tuple[int, ...], hidden: Sequence[int], drop_p: float,
                  rng: np.random.Generator) -> list[np.ndarray]:
    """Inverted-dropout keep masks, one per hidden layer."""
    if drop_p <= 0.0:
        return [np.ones(shape + (h,)) for h in hidden]
    keep = 1.0 - drop_p
    return [(rng.random(shape + (h,)) < keep) / keep for h in hidden]


def dropout_disagreement_reward(model: MlpParams, feat, action, passes: int, drop_p: float,
                                rng: np.random.Generator, action_code: np.ndarray | None = None) -> np.ndarray:
    """Disagreement across ``passes`` stochastic dropout passes of one model."""
    if passes < 2:
        raise ValueError("dropout disagreement needs at least 2 passes")
    feat = value_of(feat)
    width = model.fan_in - feat.shape[-1]
    n_act = width if action_code is None else action_code.shape[0]
    x = model_input(feat, action, n_act, action_code)
    hidden = [value_of(l.weight).shape[1] for l in model.layers[:-1]]
    outs = [forward(model, x, dropout_masks(x.shape[:-1], hidden, drop_p, rng)) for _ in range(passes)]
    return disagreement_reward(outs)


class RewardNormalizer:
    """Divides rewards by the running standard deviation of all rewards seen."""

    def __init__(self, eps: float = 1e-8):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.eps = eps

    @property
    def std(self) -> float:
        return float(np.sqrt(self.m2 / self.count)) if self.count else 1.0

    def update(self, values) -> None:
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            return
        n, mean, var = values.size, values.mean(), values.var()
        delta = mean - self.mean
        total = self.count + n
        self.mean += delta * n / total
        self.m2 += var * n + delta * delta * self.count * n / total
        self.count = total

    def __call__(self, values) -> np.ndarray:
        self.update(values)
        return np.asarray(values, dtype=np.float64) / (self.std + self.eps)
