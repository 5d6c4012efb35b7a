"""Policy optimizers: clipped PPO, REINFORCE, and direct gradients through
the ensemble disagreement (plus the mix of the last with PPO)."""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from ..diffcore import NonFiniteError, Tape, ops, tree_leaves, tree_map, value_of
from ..intrinsic.models import ForwardEnsemble, one_hot, predict_all
from ..intrinsic.rewards import disagreement_reward, ensemble_mean
from .advantage import RolloutBatch
from .net import PolicyNet, policy_logits, policy_outputs, sample_categorical

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def _flat(grads) -> np.ndarray:
    return np.concatenate([g.reshape(-1) for g in tree_leaves(grads)])


def relative_grad_variance(grads: list[Any], weights: list[float] | None = None) -> float:
    """Weighted spread of gradient estimates relative to their mean, E||g_j - g||^2 / ||g||^2.

    Only the logits-head part of each gradient is used, so value-loss terms
    do not mix into the comparison between optimizers.
    """
    grads = [g.logits_head if isinstance(g, PolicyNet) else g for g in grads]
    if len(grads) < 2:
        return float("nan")
    flat = np.stack([_flat(g) for g in grads])
    w = np.full(len(grads), 1.0 / len(grads)) if weights is None else np.asarray(weights) / np.sum(weights)
    mean = w @ flat
    denom = float(mean @ mean)
    if denom == 0.0:
        return float("nan")
    return float(w @ np.sum((flat - mean) ** 2, axis=1)) / denom


def _finite(x) -> bool:
    return bool(np.all(np.isfinite(value_of(x))))


# ---------------------------------------------------------------- PPO

def ppo_loss(policy: PolicyNet, mb: RolloutBatch, adv: np.ndarray, clip_eps: float,
             vf_coef: float, ent_coef: float):
    """Clipped surrogate + value loss - entropy bonus, to be minimized.

    The min over the clipped and unclipped terms is resolved numerically
    per sample: where the clipped term is selected its ratio is a constant,
    so the sample contributes no gradient.
    """
    logits, value = policy_outputs(policy, mb.obs)
    probs = ops.softmax(logits)
    p_taken = ops.reduce_sum(ops.mul(probs, one_hot(mb.actions, probs.shape[-1])), axis=-1)
    ratio = ops.mul(p_taken, 1.0 / np.exp(mb.logprobs))
    r = value_of(ratio)
    clipped = np.clip(r, 1.0 - clip_eps, 1.0 + clip_eps)
    use_raw = r * adv <= clipped * adv
    surrogate = ops.add(ops.mul(ratio, adv * use_raw), clipped * adv * ~use_raw)
    policy_loss = ops.mul(ops.reduce_mean(surrogate), -1.0)
    value_loss = ops.reduce_mean(ops.mul(ops.sub(value, mb.returns), ops.sub(value, mb.returns)))
    logp = ops.log(ops.add(probs, PROB_FLOOR))
    entropy = ops.mul(ops.reduce_mean(ops.reduce_sum(ops.mul(probs, logp), axis=-1)), -1.0)
    loss = ops.add(ops.add(policy_loss, ops.mul(value_loss, vf_coef)), ops.mul(entropy, -ent_coef))
    diag = {
        "policy_loss": float(value_of(policy_loss)),
        "value_loss": float(value_of(value_loss)),
        "entropy": float(value_of(entropy)),
        "clip_frac": float(np.mean(np.abs(r - 1.0) > clip_eps)),
        "approx_kl": float(np.mean((r - 1.0) - np.log(np.maximum(r, PROB_FLOOR)))),
    }
    return loss, diag


def _ppo_grad(policy, mb, adv, clip_eps, vf_coef, ent_coef):
    tape = Tape()
    p = tape.watch(policy)
    loss, diag = ppo_loss(p, mb, adv, clip_eps, vf_coef, ent_coef)
    return tape.grad(loss, p), float(value_of(loss)), diag


def _normalized_advantages(batch: RolloutBatch) -> np.ndarray:
    a = batch.advantages
    return (a - a.mean()) / (a.std() + 1e-8)


def _minibatches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    return [order[i:i + size] for i in range(0, n, size)]


def _summarize(diags: list[dict], extra: dict) -> dict:
    out = {k: float(np.mean([d[k] for d in diags])) for k in diags[0]} if diags else {}
    out.update(extra)
    return out


def ppo_update(policy: PolicyNet, batch: RolloutBatch, opt, rng: np.random.Generator, epochs: int = 4,
               clip_eps: float = 0.2, minibatch: int = 64, ent_coef: float = 0.01,
               vf_coef: float = 0.5) -> tuple[PolicyNet, dict]:
    return combined_update(policy, None, batch, None, 0.0, opt, rng, None, epochs=epochs,
                           clip_eps=clip_eps, minibatch=minibatch, ent_coef=ent_coef, vf_coef=vf_coef)


# ---------------------------------------------------------------- REINFORCE

def reinforce_loss(policy: PolicyNet, obs: np.ndarray, actions: np.ndarray, weights: np.ndarray):
    """-mean(log pi(a|x) * weight)."""
    probs = ops.softmax(policy_logits(policy, obs))
    p_taken = ops.reduce_sum(ops.mul(probs, one_hot(actions, probs.shape[-1])), axis=-1)
    return ops.mul(ops.reduce_mean(ops.mul(ops.log(ops.add(p_taken, PROB_FLOOR)), weights)), -1.0)


def reinforce_update(policy: PolicyNet, batch: RolloutBatch, opt, baseline: float | None = None,
                     baseline_decay: float = 0.9, chunk: int = 64) -> tuple[PolicyNet, float, dict]:
    """Score-function step on (return - moving-average baseline).

    ``batch.returns`` must hold Monte-Carlo returns. The gradient is
    assembled from ``chunk``-sized pieces so their spread can be reported.
    Returns the new policy, the updated baseline and diagnostics.
    """
    b = 0.0 if baseline is None else float(baseline)
    weights = batch.returns - b
    n = len(batch)
    grads, sizes, losses = [], [], []
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        tape = Tape()
        p = tape.watch(policy)
        loss = reinforce_loss(p, batch.obs[sl], batch.actions[sl], weights[sl])
        grads.append(tape.grad(loss, p))
        sizes.append(sl.stop - sl.start)
        losses.append(float(loss.value))
    w = np.asarray(sizes, dtype=np.float64) / n
    total = tree_map(lambda *gs: sum(wi * g for wi, g in zip(w, gs)), grads[0], *grads[1:])
    new_baseline = baseline_decay * b + (1.0 - baseline_decay) * float(batch.returns.mean())
    diag = {"policy_loss": float(np.dot(w, losses)), "grad_var": relative_grad_variance(grads, sizes),
            "baseline": b, "skipped": 0}
    if not np.isfinite(diag["policy_loss"]) or not _finite(_flat(total)):
        log.error("reinforce update skipped: non-finite loss or gradient")
        diag["skipped"] = 1
        return policy, new_baseline, diag
    return opt.step(policy, total), new_baseline, diag


# ---------------------------------------------------------------- differentiable

def straight_through_onehot(logits, rng: np.random.Generator):
    """Sampled one-hot action whose gradient is that of softmax(logits).

    Forward value: the hard one-hot sample (exactly 0/1 in floating point).
    Backward: hard = soft + stop_gradient(onehot - soft).
    Returns (one-hot, sampled indices).
    """
    soft = ops.softmax(logits)
    idx = sample_categorical(value_of(soft), rng)
    hard = one_hot(idx, value_of(soft).shape[-1])
    return ops.add(soft, ops.stop_gradient(ops.sub(hard, soft))), idx


def imagined_objective(policy: PolicyNet, ens: ForwardEnsemble, feats: np.ndarray, horizon: int,
                       gamma: float, rng: np.random.Generator | None, relaxed: bool = False,
                       reward_scale: float = 1.0):
    """Discounted disagreement along an imagined rollout, averaged over the batch.

    The first state is the real encoded observation; each later state is the
    ensemble-mean prediction. Nothing here touches an environment. With
    ``relaxed`` the action fed to the models is softmax(logits) itself (the
    smooth path the straight-through gradient follows), so the objective is
    a deterministic smooth function of the policy parameters. Each step's
    reward is multiplied by ``reward_scale``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x = feats
    total = None
    rewards = []
    for t in range(horizon):
        logits = policy_logits(policy, x)
        action = ops.softmax(logits) if relaxed else straight_through_onehot(logits, rng)[0]
        preds = predict_all(ens, x, action)
        r = ops.mul(ops.reduce_mean(disagreement_reward(preds)), reward_scale * gamma ** t)
        rewards.append(float(value_of(r)))
        total = r if total is None else ops.add(total, r)
        x = ensemble_mean(preds)
    return total, rewards


def _diff_grad(policy, ens, feats, horizon, gamma, rng, reward_scale=1.0):
    tape = Tape()
    p = tape.watch(policy)
    objective, rewards = imagined_objective(p, ens, feats, horizon, gamma, rng, reward_scale=reward_scale)
    loss = ops.mul(objective, -1.0)
    return tape.grad(loss, p), float(value_of(objective)), rewards


def differentiable_explore_update(policy: PolicyNet, ens: ForwardEnsemble, feats: np.ndarray,
                                  horizon: int, opt, rng: np.random.Generator, gamma: float = 0.99,
                                  steps: int = 1, reward_scale: float = 1.0) -> tuple[PolicyNet, dict]:
    """Ascend the imagined disagreement objective with respect to the policy only.

    Ensemble parameters enter as constants, so they receive no gradient and
    are never modified here.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    objectives = []
    skipped = 0
    for _ in range(steps):
        grads, objective, _ = _diff_grad(policy, ens, feats, horizon, gamma, rng, reward_scale)
        if not np.isfinite(objective) or not _finite(_flat(grads)):
            log.error("differentiable update skipped: non-finite objective or gradient")
            skipped += 1
            continue
        policy = opt.step(policy, grads)
        objectives.append(objective)
    return policy, {"objective": float(np.mean(objectives)) if objectives else float("nan"),
                    "skipped": skipped}


# ---------------------------------------------------------------- combined

def combined_update(policy: PolicyNet, ens: ForwardEnsemble | None, batch: RolloutBatch,
                    feats: np.ndarray | None, mix: float, opt, rng: np.random.Generator,
                    st_rng: np.random.Generator | None, epochs: int = 4, clip_eps: float = 0.2,
                    minibatch: int = 64, ent_coef: float = 0.01, vf_coef: float = 0.5,
                    horizon: int = 1, gamma: float = 0.99,
                    reward_scale: float = 1.0) -> tuple[PolicyNet, dict]:
    """PPO schedule where every step uses mix*g_diff + (1-mix)*g_ppo.

    ``rng`` shuffles minibatches and ``st_rng`` drives the straight-through
    samples; keeping them apart makes mix=0 identical to :func:`ppo_update`
    and mix=1 identical to :func:`differentiable_explore_update` run for the
    same number of steps. ``reward_scale`` multiplies the imagined rewards,
    so they can be put on the same scale as the normalized RL rewards.
    """
    if not 0.0 <= mix <= 1.0:
        raise ValueError("mix must lie in [0, 1]")
    if mix > 0 and (ens is None or feats is None or st_rng is None):
        raise ValueError("mix > 0 needs an ensemble, features and a straight-through rng")
    adv = _normalized_advantages(batch)
    diags, objectives = [], []
    first_epoch_grads, first_epoch_sizes = [], []
    skipped = 0
    for epoch in range(epochs):
        for idx in _minibatches(len(batch), minibatch, rng):
            g = None
            if mix < 1.0:
                try:
                    g_ppo, loss, diag = _ppo_grad(policy, batch.take(idx), adv[idx], clip_eps, vf_coef, ent_coef)
                except NonFiniteError:
                    loss = float("nan")
                if not np.isfinite(loss):
                    log.error("ppo step skipped: non-finite loss")
                    skipped += 1
                    continue
                diags.append(diag)
                if epoch == 0:
                    first_epoch_grads.append(g_ppo)
                    first_epoch_sizes.append(len(idx))
                g = g_ppo if mix == 0.0 else tree_map(lambda a: (1.0 - mix) * a, g_ppo)
            if mix > 0.0:
                g_diff, objective, _ = _diff_grad(policy, ens, feats, horizon, gamma, st_rng, reward_scale)
                objectives.append(objective)
                g_diff = g_diff if mix == 1.0 else tree_map(lambda a: mix * a, g_diff)
                g = g_diff if g is None else tree_map(np.add, g, g_diff)
            try:
                policy = opt.step(policy, g)
            except NonFiniteError:
                skipped += 1
    extra = {"skipped": skipped, "grad_var": relative_grad_variance(first_epoch_grads, first_epoch_sizes)}
    if objectives:
        extra["objective"] = float(np.mean(objectives))
    return policy, _summarize(diags, extra)
