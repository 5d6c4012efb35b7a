"""Actor-critic policy and the optimizers that train it on intrinsic reward."""

from .advantage import RolloutBatch, compute_gae, discounted_returns, make_batch
from .net import PolicyNet, act, greedy_action, make_policy, policy_logits, policy_outputs, sample_categorical
from .updates import (combined_update, differentiable_explore_update, imagined_objective, ppo_loss,
                      ppo_update, reinforce_loss, reinforce_update, relative_grad_variance,
                      straight_through_onehot)

__all__ = [
    "PolicyNet", "RolloutBatch", "act", "combined_update", "compute_gae", "differentiable_explore_update",
    "discounted_returns", "greedy_action", "imagined_objective", "make_batch", "make_policy",
    "policy_logits", "policy_outputs", "ppo_loss", "ppo_update", "reinforce_loss", "reinforce_update",
    "relative_grad_variance", "sample_categorical", "straight_through_onehot",
]
