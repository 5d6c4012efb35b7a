from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import MlpParams, forward, init_mlp, ops, value_of
from ..rng import stream


@dataclass(frozen=True)
class PolicyNet:
    """Shared tanh trunk with a logits head and a scalar value head."""

    trunk: MlpParams
    logits_head: MlpParams
    value_head: MlpParams

    @property
    def d_in(self) -> int:
        return self.trunk.fan_in

    @property
    def action_count(self) -> int:
        return self.logits_head.fan_out


def make_policy(d_in: int, action_count: int, hidden: int = 64, seed: int = 0) -> PolicyNet:
    rng = stream(seed, "policy-init")
    return PolicyNet(
        trunk=init_mlp([d_in, hidden], ["tanh"], rng),
        logits_head=init_mlp([hidden, action_count], ["identity"], rng),
        value_head=init_mlp([hidden, 1], ["identity"], rng),
    )


def policy_logits(policy: PolicyNet, x):
    return forward(policy.logits_head, forward(policy.trunk, x))


def policy_outputs(policy: PolicyNet, x):
    """(logits, value) where value drops the trailing unit axis."""
    h = forward(policy.trunk, x)
    value = ops.reduce_sum(forward(policy.value_head, h), axis=-1)
    return forward(policy.logits_head, h), value


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling, one draw per row of ``probs``."""
    u = rng.random(probs.shape[:-1])
    cdf = np.cumsum(probs, axis=-1)
    idx = (cdf < u[..., None] * cdf[..., -1:]).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def act(policy: PolicyNet, obs, rng: np.random.Generator):
    """Sample actions for a batch (or a single observation).

    Returns (actions, logprobs, values) with the batch shape of ``obs``.
    """
    logits, value = policy_outputs(policy, value_of(obs))
    probs = ops.softmax(logits)
    actions = sample_categorical(probs, rng)
    p = np.take_along_axis(probs, actions[..., None], axis=-1)[..., 0]
    return actions, np.log(p), value


def greedy_action(policy: PolicyNet, obs) -> np.ndarray:
    return np.argmax(policy_logits(policy, value_of(obs)), axis=-1)
