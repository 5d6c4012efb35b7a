"""Forward-model ensembles and the intrinsic rewards derived from them."""

from .buffer import ReplayBuffer
from .models import (DropoutModel, ForwardEnsemble, make_dropout_model, make_ensemble, model_input,
                     one_hot, predict_all, train_dropout_model, train_ensemble)
from .rewards import (REWARD_KINDS, RewardNormalizer, disagreement_reward, dropout_disagreement_reward,
                      ensemble_mean, pred_error_variance_reward, prediction_error_reward)

__all__ = [
    "DropoutModel", "ForwardEnsemble", "REWARD_KINDS", "ReplayBuffer", "RewardNormalizer",
    "disagreement_reward", "dropout_disagreement_reward", "ensemble_mean", "make_dropout_model",
    "make_ensemble", "model_input", "one_hot", "pred_error_variance_reward", "predict_all",
    "prediction_error_reward", "train_dropout_model", "train_ensemble",
]
