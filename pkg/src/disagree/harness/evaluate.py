"""Policy evaluation on fresh environments, and agent checkpoints."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..diffcore import load_bundle, ops, save_bundle
from ..envs import EnvDescriptor, make_env
from ..features import FeatureEncoder, freeze_params, make_encoder
from ..policy import PolicyNet, greedy_action, policy_logits, sample_categorical
from ..rng import stream


@dataclass(frozen=True)
class EvalSummary:
    episodes: int
    steps: int
    mean_return: float
    goal_rate: float
    interaction_rate: float


def eval_policy(policy: PolicyNet, desc: EnvDescriptor, episodes: int, seed: int,
                encoder: FeatureEncoder | None = None, greedy: bool = True) -> EvalSummary:
    """Run ``episodes`` episodes on fresh environment instances.

    Each episode gets its own env seeded from ``seed``; actions are argmax
    (or sampled when ``greedy`` is False, from a stream keyed by ``seed``).
    Nothing outside this call is read or modified besides ``policy`` and
    ``encoder``, which are immutable. Goal rate is the fraction of episodes
    that collected any positive extrinsic reward.
    """
    if episodes < 1:
        raise ValueError("episodes must be positive")
    envs = [make_env(desc.name, int(stream(seed, "eval-env", i).integers(2**31)), **desc.options)
            for i in range(episodes)]
    enc = encoder or make_encoder("identity", envs[0].d_obs)
    rng = stream(seed, "eval-actions")
    obs = np.stack([e.reset() for e in envs])
    live = np.ones(episodes, dtype=bool)
    returns = np.zeros(episodes)
    touched = 0
    steps = 0
    while live.any():
        idx = np.flatnonzero(live)
        feats = enc.encode(obs[idx])
        if greedy:
            actions = greedy_action(policy, feats)
        else:
            actions = sample_categorical(ops.softmax(policy_logits(policy, feats)), rng)
        for j, a in zip(idx, actions):
            tr = envs[j].step(int(a))
            returns[j] += tr.extrinsic
            touched += "touched-object" in tr.info
            steps += 1
            obs[j] = tr.next_obs
            live[j] = not tr.done
    return EvalSummary(episodes, steps, float(returns.mean()), float(np.mean(returns > 0)), touched / steps)


def save_agent(path: str | Path, policy: PolicyNet, encoder: FeatureEncoder) -> None:
    """Policy heads plus (for random-net features) the frozen encoder, as one bundle."""
    records = {"policy/trunk": policy.trunk, "policy/logits": policy.logits_head,
               "policy/value": policy.value_head}
    if encoder.kind == "random-net":
        records["encoder"] = encoder.params
    save_bundle(path, records)


def load_agent(path: str | Path) -> tuple[PolicyNet, FeatureEncoder]:
    records = load_bundle(path)
    policy = PolicyNet(records["policy/trunk"], records["policy/logits"], records["policy/value"])
    if "encoder" in records:
        enc_params = freeze_params(records["encoder"])
        encoder = FeatureEncoder("random-net", enc_params.fan_in, enc_params.fan_out, enc_params)
    else:
        encoder = make_encoder("identity", policy.d_in)
    return policy, encoder
