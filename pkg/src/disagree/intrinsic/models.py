"""Forward-dynamics models: the bootstrap ensemble and the dropout baseline."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..diffcore import (AdamState, MlpParams, ShapeError, Tape, adam_step, forward,
                        init_mlp, ops, value_of)
from ..rng import stream
from .buffer import ReplayBuffer

log = logging.getLogger(__name__)


def one_hot(actions, action_count: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=np.int64)
    out = np.zeros(actions.shape + (action_count,))
    np.put_along_axis(out, actions[..., None], 1.0, axis=-1)
    return out


def model_input(feat, action, action_count: int, action_code: np.ndarray | None = None):
    """concat(feat, encoded action).

    ``action`` is either integer indices (one fewer dim than ``feat``) or an
    already one-hot array/node with the same number of dims as ``feat``,
    which keeps the path differentiable in the action. ``action_code``
    (action_count x d_act) maps a one-hot to the model's action encoding;
    None means the one-hot itself.
    """
    fdim = np.ndim(value_of(feat))
    adim = np.ndim(value_of(action))
    if adim == fdim:
        if value_of(action).shape[-1] != action_count:
            raise ShapeError(f"one-hot action has {value_of(action).shape[-1]} entries, expected {action_count}")
        code = action if action_code is None else ops.affine(action, action_code, np.zeros(action_code.shape[1]))
    elif adim == fdim - 1:
        idx = np.asarray(value_of(action), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= action_count):
            raise ShapeError(f"action index outside [0, {action_count})")
        code = one_hot(idx, action_count) if action_code is None else action_code[idx]
    else:
        raise ShapeError(f"action shape {np.shape(value_of(action))} does not fit features {np.shape(value_of(feat))}")
    return ops.concat([feat, code], axis=-1)


def action_width(action_count: int, action_code: np.ndarray | None) -> int:
    if action_code is None:
        return action_count
    if action_code.shape[0] != action_count:
        raise ShapeError(f"action code has {action_code.shape[0]} rows, expected {action_count}")
    return action_code.shape[1]


@dataclass(frozen=True)
class ForwardEnsemble:
    members: tuple[MlpParams, ...]
    d_feat: int
    action_count: int
    bootstrap_keep: float = 0.7
    opt_states: tuple[AdamState | None, ...] = ()
    seed: int = 0
    updates: int = 0
    action_code: np.ndarray | None = None

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least 2 members")
        width = action_width(self.action_count, self.action_code)
        for m in self.members:
            if m.fan_in != self.d_feat + width or m.fan_out != self.d_feat:
                raise ShapeError("member dims do not match (d_feat + action code) -> d_feat")
        if not self.opt_states:
            object.__setattr__(self, "opt_states", (None,) * len(self.members))

    @property
    def k(self) -> int:
        return len(self.members)


def make_ensemble(d_feat: int, action_count: int, k: int = 5, hidden: Sequence[int] = (64,),
                  seed: int = 0, bootstrap_keep: float = 0.7,
                  action_code: np.ndarray | None = None) -> ForwardEnsemble:
    sizes = [d_feat + action_width(action_count, action_code), *hidden, d_feat]
    acts = ["relu"] * len(hidden) + ["identity"]
    members = tuple(init_mlp(sizes, acts, stream(seed, "ensemble-member", i)) for i in range(k))
    return ForwardEnsemble(members, d_feat, action_count, bootstrap_keep, seed=seed, action_code=action_code)


def predict_all(ens: ForwardEnsemble, feat, action) -> list:
    """One next-feature prediction per member."""
    if value_of(feat).shape[-1] != ens.d_feat:
        raise ShapeError(f"features have dim {value_of(feat).shape[-1]}, ensemble expects {ens.d_feat}")
    x = model_input(feat, action, ens.action_count, ens.action_code)
    return [forward(m, x) for m in ens.members]


def _fit(params: MlpParams, opt_state, buffer: ReplayBuffer, action_count: int, eligible: np.ndarray,
         batch_size: int, steps: int, lr: float, rng: np.random.Generator,
         drop_p: float = 0.0, action_code: np.ndarray | None = None) -> tuple[MlpParams, Any, float]:
    """Adam steps on minibatches of the buffer slots in ``eligible``, epoch by epoch."""
    from .rewards import dropout_masks

    hidden = [value_of(l.weight).shape[1] for l in params.layers[:-1]]
    # inputs and targets for the eligible slots, gathered once; batches index into them
    inputs = value_of(model_input(buffer.feat[eligible], buffer.action[eligible], action_count, action_code))
    targets = buffer.next_feat[eligible]
    n = len(eligible)
    order = rng.permutation(n)
    pos = 0
    losses = []
    for _ in range(steps):
        if pos >= n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos:pos + batch_size]
        pos += batch_size
        tape = Tape()
        p = tape.watch(params)
        masks = dropout_masks((len(idx),), hidden, drop_p, rng) if drop_p > 0 else None
        pred = forward(p, inputs[idx], masks)
        loss = ops.reduce_mean(ops.sq_norm(ops.sub(pred, targets[idx])))
        params, opt_state = adam_step(params, tape.grad(loss, p), opt_state, lr)
        losses.append(float(loss.value))
    return params, opt_state, float(np.mean(losses)) if losses else float("nan")


def _eligible_slots(buffer: ReplayBuffer, window: int | None, now: int | None) -> np.ndarray:
    if len(buffer) == 0:
        raise ValueError("cannot train on an empty buffer")
    slots = buffer.recent(window)
    if now is not None:
        future = buffer.stamp[slots] > now
        if np.any(future):
            raise AssertionError(
                f"buffer holds transitions stamped after step {now}: {buffer.stamp[slots][future].max()}"
            )
    return slots


def train_ensemble(ens: ForwardEnsemble, buffer: ReplayBuffer, batch_size: int, steps: int,
                   lr: float = 1e-3, window: int | None = None,
                   now: int | None = None) -> tuple[ForwardEnsemble, list[float]]:
    """Give every member ``steps`` Adam steps on its own bootstrap subset.

    Only the ``window`` most recent transitions are eligible (all if None);
    ``now`` asserts that nothing in that window was collected later than the
    current step. Returns the new ensemble and each member's mean loss.
    """
    if steps == 0:
        return ens, [float("nan")] * ens.k
    slots = _eligible_slots(buffer, window, now)
    members, states, losses = [], [], []
    for i, (params, state) in enumerate(zip(ens.members, ens.opt_states)):
        eligible = slots[buffer.mask[slots, i]]
        if eligible.size == 0:
            log.warning("member %d: bootstrap mask selects no transitions, using the full window", i)
            eligible = slots
        rng = stream(ens.seed, f"ensemble-batches/{i}", ens.updates)
        params, state, loss = _fit(params, state, buffer, ens.action_count, eligible,
                                   batch_size, steps, lr, rng, action_code=ens.action_code)
        members.append(params)
        states.append(state)
        losses.append(loss)
    return dataclasses.replace(ens, members=tuple(members), opt_states=tuple(states),
                               updates=ens.updates + 1), losses


@dataclass(frozen=True)
class DropoutModel:
    """Single forward model trained with dropout for the Bayesian baseline."""

    params: MlpParams
    d_feat: int
    action_count: int
    drop_p: float = 0.2
    opt_state: AdamState | None = None
    seed: int = 0
    updates: int = 0
    action_code: np.ndarray | None = None


def make_dropout_model(d_feat: int, action_count: int, hidden: Sequence[int] = (64,),
                       drop_p: float = 0.2, seed: int = 0,
                       action_code: np.ndarray | None = None) -> DropoutModel:
    sizes = [d_feat + action_width(action_count, action_code), *hidden, d_feat]
    acts = ["relu"] * len(hidden) + ["identity"]
    params = init_mlp(sizes, acts, stream(seed, "dropout-model"))
    return DropoutModel(params, d_feat, action_count, drop_p, seed=seed, action_code=action_code)


def train_dropout_model(model: DropoutModel, buffer: ReplayBuffer, batch_size: int, steps: int,
                        lr: float = 1e-3, window: int | None = None,
                        now: int | None = None) -> tuple[DropoutModel, float]:
    if steps == 0:
        return model, float("nan")
    slots = _eligible_slots(buffer, window, now)
    rng = stream(model.seed, "dropout-batches", model.updates)
    params, state, loss = _fit(model.params, model.opt_state, buffer, model.action_count, slots,
                               batch_size, steps, lr, rng, model.drop_p, model.action_code)
    return dataclasses.replace(model, params=params, opt_state=state, updates=model.updates + 1), loss
