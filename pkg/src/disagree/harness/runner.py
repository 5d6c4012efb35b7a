"""The online loop: collect a rollout, score it, train the models, update the policy."""

from __future__ import annotations

import hashlib
import logging
import math
import time
from pathlib import Path

import numpy as np

from ..diffcore import Adam
from ..envs import make_env
from ..features import make_encoder
from ..intrinsic import (ReplayBuffer, RewardNormalizer, disagreement_reward, dropout_disagreement_reward,
                         make_dropout_model, make_ensemble, pred_error_variance_reward, predict_all,
                         prediction_error_reward, train_dropout_model, train_ensemble)
from ..policy import (act, combined_update, differentiable_explore_update, make_batch, make_policy,
                      policy_outputs, ppo_update, reinforce_update)
from ..rng import RNG_VERSION, stream
from .config import RunConfig
from .evaluate import eval_policy
from .runlog import RUNLOG_VERSION, RunLog

log = logging.getLogger(__name__)

SCHEDULE = ("collect", "score", "train-models", "update-policy")
RL_OPTIMIZERS = ("ppo", "reinforce", "combined")


class RunError(RuntimeError):
    def __init__(self, step: int, cause: BaseException):
        super().__init__(f"run aborted at step {step}: {type(cause).__name__}: {cause}")
        self.step = step


def source_hash() -> str:
    """Digest of the package source, built from git-style blob hashes."""
    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for path in sorted(root.rglob("*.py")):
        data = path.read_bytes()
        blob = hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
        h.update(f"{blob} {path.relative_to(root).as_posix()}\n".encode())
    return h.hexdigest()


def _class_of(info: frozenset) -> int:
    for tag in info:
        if tag.startswith("state-class="):
            return int(tag.split("=", 1)[1])
    return -1


class Runner:
    """Holds every piece of run state; :meth:`run` drives it to completion."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        seed = cfg.seed
        self.envs = [make_env(cfg.env, int(stream(seed, "env-seed", i).integers(2**31)), **cfg.env_options)
                     for i in range(cfg.num_envs)]
        self.descriptor = self.envs[0].descriptor
        d_obs, n_act = self.descriptor.d_obs, self.descriptor.action_count
        self.encoder = make_encoder(cfg.encoder, d_obs, cfg.d_feat, cfg.encoder_hidden, seed)
        d_feat = self.encoder.d_feat
        code = self.envs[0].action_code() if cfg.action_encoding == "auto" else None
        if cfg.reward == "dropout-disagreement":
            self.ensemble = None
            self.dropout_model = make_dropout_model(d_feat, n_act, (cfg.ensemble_hidden,), cfg.drop_p, seed, code)
        else:
            self.ensemble = make_ensemble(d_feat, n_act, cfg.k, (cfg.ensemble_hidden,), seed,
                                          cfg.bootstrap_keep, code)
            self.dropout_model = None
        self.buffer = ReplayBuffer(cfg.buffer_capacity, d_feat, cfg.k, cfg.bootstrap_keep,
                                   stream(seed, "bootstrap-masks"))
        self.policy = make_policy(d_feat, n_act, cfg.policy_hidden, seed)
        self.opt = Adam(cfg.policy_lr)
        self.normalizer = RewardNormalizer()
        self.baseline: float | None = None
        self.act_rng = stream(seed, "policy-act")
        self.ppo_rng = stream(seed, "ppo-minibatches")
        self.st_rng = stream(seed, "straight-through")
        self.reward_rng = stream(seed, "dropout-reward")
        self.obs = np.stack([e.reset() for e in self.envs])
        self.episode_ext = np.zeros(cfg.num_envs)
        self.step = 0
        self.first_extrinsic_step: int | None = None
        self.log = RunLog(meta={
            "runlog_version": RUNLOG_VERSION,
            "rng_version": RNG_VERSION,
            "config": cfg.to_dict(),
            "descriptor": {"name": self.descriptor.name, "d_obs": d_obs, "action_count": n_act,
                           "horizon": self.descriptor.horizon},
            "schedule": list(SCHEDULE),
            "source_hash": source_hash(),
        })

    # ------------------------------------------------------------ phases

    def collect(self) -> dict:
        cfg = self.cfg
        T, N = cfg.steps_per_env, cfg.num_envs
        d = self.encoder.d_feat
        feats = np.zeros((T, N, d))
        next_feats = np.zeros((T, N, d))
        actions = np.zeros((T, N), dtype=np.int64)
        logprobs = np.zeros((T, N))
        values = np.zeros((T, N))
        ext = np.zeros((T, N))
        dones = np.zeros((T, N), dtype=bool)
        classes = np.full((T, N), -1)
        touched = np.zeros((T, N), dtype=bool)
        episodes, goals = 0, 0
        next_obs = np.zeros_like(self.obs)
        for t in range(T):
            f = self.encoder.encode(self.obs)
            a, lp, v = act(self.policy, f, self.act_rng)
            for i, env in enumerate(self.envs):
                tr = env.step(int(a[i]))
                next_obs[i] = tr.next_obs
                ext[t, i] = tr.extrinsic
                dones[t, i] = tr.done
                classes[t, i] = _class_of(tr.info)
                touched[t, i] = "touched-object" in tr.info
                self.episode_ext[i] += tr.extrinsic
                if tr.extrinsic > 0 and self.first_extrinsic_step is None:
                    self.first_extrinsic_step = self.step + t * N + i + 1
                if tr.done:
                    episodes += 1
                    goals += self.episode_ext[i] > 0
                    self.episode_ext[i] = 0.0
                    self.obs[i] = env.reset()
                else:
                    self.obs[i] = tr.next_obs
            feats[t], actions[t], logprobs[t], values[t] = f, a, lp, v
            next_feats[t] = self.encoder.encode(next_obs)
        _, last_values = policy_outputs(self.policy, self.encoder.encode(self.obs))
        stamps = self.step + np.arange(T * N).reshape(T, N) + 1
        return dict(feats=feats, next_feats=next_feats, actions=actions, logprobs=logprobs, values=values,
                    ext=ext, dones=dones, classes=classes, touched=touched, last_values=last_values,
                    stamps=stamps, episodes=episodes, goals=goals)

    def score(self, ro: dict) -> np.ndarray:
        """Raw intrinsic reward per transition, from the current model snapshot."""
        cfg = self.cfg
        shape = ro["actions"].shape
        f = ro["feats"].reshape(-1, self.encoder.d_feat)
        a = ro["actions"].reshape(-1)
        nf = ro["next_feats"].reshape(-1, self.encoder.d_feat)
        if cfg.reward == "dropout-disagreement":
            r = dropout_disagreement_reward(self.dropout_model.params, f, a, cfg.resolved_dropout_passes,
                                            cfg.drop_p, self.reward_rng, self.dropout_model.action_code)
        else:
            preds = predict_all(self.ensemble, f, a)
            if cfg.reward == "disagreement":
                r = disagreement_reward(preds)
            elif cfg.reward == "pred-error":
                r = prediction_error_reward(preds, nf)
            else:
                r = pred_error_variance_reward(preds, nf)
        return np.asarray(r).reshape(shape)

    def train_models(self, ro: dict) -> float:
        cfg = self.cfg
        self.buffer.add(ro["feats"].reshape(-1, self.encoder.d_feat), ro["actions"].reshape(-1),
                        ro["next_feats"].reshape(-1, self.encoder.d_feat), ro["stamps"].reshape(-1))
        window = cfg.resolved_window
        # training volume is fixed at ``ensemble_epochs`` passes' worth of one rollout;
        # the window only decides which transitions those batches are drawn from
        steps = cfg.ensemble_epochs * math.ceil(cfg.rollout / cfg.ensemble_batch)
        now = self.step + cfg.rollout
        if self.ensemble is not None:
            self.ensemble, losses = train_ensemble(self.ensemble, self.buffer, cfg.ensemble_batch, steps,
                                                   cfg.ensemble_lr, window, now)
            return float(np.mean(losses))
        self.dropout_model, loss = train_dropout_model(self.dropout_model, self.buffer, cfg.ensemble_batch,
                                                       steps, cfg.ensemble_lr, window, now)
        return loss

    def update_policy(self, ro: dict, intrinsic: np.ndarray) -> dict:
        cfg = self.cfg
        r = intrinsic
        if cfg.normalize_rewards and cfg.optimizer in RL_OPTIMIZERS:
            r = self.normalizer(r)
        rewards = cfg.intrinsic_coef * r + cfg.resolved_extrinsic_coef * ro["ext"]
        flat_feats = ro["feats"].reshape(-1, self.encoder.d_feat)
        if cfg.optimizer == "differentiable":
            self.policy, diag = differentiable_explore_update(self.policy, self.ensemble, flat_feats, cfg.horizon,
                                                              self.opt, self.st_rng, cfg.gamma, cfg.diff_steps)
            return diag
        batch = make_batch(ro["feats"], ro["actions"], ro["logprobs"], ro["values"], rewards, ro["dones"],
                           ro["last_values"], cfg.gamma, cfg.lam, monte_carlo=cfg.optimizer == "reinforce")
        if cfg.optimizer == "reinforce":
            self.policy, self.baseline, diag = reinforce_update(self.policy, batch, self.opt, self.baseline,
                                                                cfg.reinforce_decay, cfg.minibatch)
            return diag
        if cfg.optimizer == "ppo":
            self.policy, diag = ppo_update(self.policy, batch, self.opt, self.ppo_rng, cfg.ppo_epochs,
                                           cfg.clip_eps, cfg.minibatch, cfg.ent_coef, cfg.vf_coef)
            return diag
        self.policy, diag = combined_update(self.policy, self.ensemble, batch, flat_feats, cfg.mix, self.opt,
                                            self.ppo_rng, self.st_rng, cfg.ppo_epochs, cfg.clip_eps,
                                            cfg.minibatch, cfg.ent_coef, cfg.vf_coef, cfg.horizon, cfg.gamma,
                                            self._imagined_scale())
        return diag

    def _imagined_scale(self) -> float:
        # in combined mode the imagined rewards get the same normalization as the RL rewards
        if self.cfg.normalize_rewards:
            return 1.0 / (self.normalizer.std + self.normalizer.eps)
        return 1.0

    def evaluate(self, round_index: int):
        return eval_policy(self.policy, self.descriptor, self.cfg.eval_episodes,
                           int(stream(self.cfg.seed, "eval-seed", round_index).integers(2**31)), self.encoder)

    # ------------------------------------------------------------ loop

    def run_round(self, round_index: int, started: float) -> dict:
        cfg = self.cfg
        ro = self.collect()
        intrinsic = self.score(ro)
        model_loss = self.train_models(ro)
        diag = self.update_policy(ro, intrinsic)
        self.step += cfg.rollout
        row = {
            "step": self.step,
            "round": round_index + 1,
            "intrinsic_mean": float(intrinsic.mean()),
            "interaction_rate": float(ro["touched"].mean()),
            "episodes_done": ro["episodes"],
            "goal_rate": ro["goals"] / ro["episodes"] if ro["episodes"] else None,
            "first_extrinsic_step": self.first_extrinsic_step,
            "ensemble_loss": model_loss,
        }
        for c in (0, 1):
            sel = ro["classes"] == c
            row[f"intrinsic_class{c}"] = float(intrinsic[sel].mean()) if sel.any() else None
        for key in ("policy_loss", "value_loss", "entropy", "clip_frac", "approx_kl", "grad_var", "objective"):
            if key in diag:
                row[key] = diag[key]
        if (round_index + 1) % cfg.eval_every == 0 or round_index + 1 == cfg.rounds:
            summary = self.evaluate(round_index)
            row["eval_return"] = summary.mean_return
            row["eval_goal_rate"] = summary.goal_rate
            row["eval_interaction_rate"] = summary.interaction_rate
        row["wall_clock"] = time.perf_counter() - started
        return row

    def run(self, progress=None) -> RunLog:
        started = time.perf_counter()
        for r in range(self.cfg.rounds):
            try:
                row = self.run_round(r, started)
            except Exception as exc:
                raise RunError(self.step, exc) from exc
            self.log.append(row)
            log.debug("round %d: %s", r + 1, row)
            if progress is not None:
                progress(row)
        return self.log


def run_experiment(cfg: RunConfig, out: str | Path | None = None) -> RunLog:
    """Run ``cfg`` to completion; write the CSV (and its metadata sidecar) if ``out`` is given."""
    runlog = Runner(cfg).run()
    if out is not None:
        runlog.write(out)
    return runlog
