from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, last_values: np.ndarray,
                gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates over the leading (time) axis.

    ``dones[t]`` marks that the episode ended with step t, so nothing is
    bootstrapped across it. Returns (advantages, value targets).
    """
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("gamma and lambda must lie in [0, 1]")
    rewards = np.asarray(rewards, dtype=np.float64)
    adv = np.zeros_like(rewards)
    next_value = np.asarray(last_values, dtype=np.float64)
    running = np.zeros_like(next_value)
    for t in range(len(rewards) - 1, -1, -1):
        live = 1.0 - np.asarray(dones[t], dtype=np.float64)
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def discounted_returns(rewards: np.ndarray, dones: np.ndarray, gamma: float,
                       last_values: np.ndarray | None = None) -> np.ndarray:
    """Monte-Carlo discounted returns, reset at episode ends."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:]) if last_values is None else np.asarray(last_values, float)
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running * (1.0 - np.asarray(dones[t], dtype=np.float64))
        out[t] = running
    return out


@dataclass(frozen=True)
class RolloutBatch:
    """Flattened on-policy samples with their advantage estimates."""

    obs: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    gamma: float = 0.99
    lam: float = 0.95

    def __post_init__(self):
        n = len(self.actions)
        for name in ("obs", "logprobs", "values", "rewards", "dones", "advantages", "returns"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lambda must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.actions)

    def take(self, idx: np.ndarray) -> "RolloutBatch":
        return RolloutBatch(self.obs[idx], self.actions[idx], self.logprobs[idx], self.values[idx],
                            self.rewards[idx], self.dones[idx], self.advantages[idx], self.returns[idx],
                            self.gamma, self.lam)


def make_batch(obs, actions, logprobs, values, rewards, dones, last_values,
               gamma: float = 0.99, lam: float = 0.95, monte_carlo: bool = False) -> RolloutBatch:
    """Build a batch from (T, N, ...) arrays collected over N parallel envs.

    With ``monte_carlo`` the value targets are discounted returns (with
    ``last_values`` bootstrapping unfinished episodes) and advantages are the
    returns themselves; REINFORCE subtracts its own baseline.
    """
    T, N = np.shape(actions)[:2]
    if monte_carlo:
        ret = discounted_returns(rewards, dones, gamma, last_values)
        adv = ret
    else:
        adv, ret = compute_gae(rewards, values, dones, last_values, gamma, lam)

    def flat(a):
        a = np.asarray(a)
        return a.reshape((T * N,) + a.shape[2:])

    return RolloutBatch(flat(obs), flat(actions).astype(np.int64), flat(logprobs), flat(values),
                        flat(rewards), flat(dones).astype(bool), flat(adv), flat(ret), gamma, lam)
