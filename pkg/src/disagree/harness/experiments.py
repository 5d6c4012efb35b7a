"""Summary statistics for the acceptance experiments, and the model-only noise study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..intrinsic import (ReplayBuffer, disagreement_reward, make_ensemble, predict_all,
                         prediction_error_reward, train_ensemble)
from ..rng import stream
from .config import RunConfig
from .runlog import RunLog


def class_reward_ratio(log: RunLog, last_steps: int = 1000) -> float:
    """Mean intrinsic reward of class-1 starts over class-0 starts, final rounds.

    Uses every round whose steps overlap the final ``last_steps`` steps,
    weighting rounds equally (each round has the same number of steps).
    """
    steps = log.column("step")
    if len(steps) == 0:
        raise ValueError("empty log")
    per_round = steps[0] if len(steps) == 1 else steps[1] - steps[0]
    n = max(1, int(np.ceil(last_steps / per_round)))
    c0 = log.column("intrinsic_class0")[-n:]
    c1 = log.column("intrinsic_class1")[-n:]
    return float(np.nanmean(c1) / np.nanmean(c0))


def steps_to_threshold(log: RunLog, column: str, threshold: float) -> float:
    """First logged step at which ``column`` reaches ``threshold``; inf if never."""
    vals, steps = log.column(column), log.column("step")
    hit = np.flatnonzero(vals >= threshold)
    return float(steps[hit[0]]) if hit.size else float("inf")


def first_visit_step(log: RunLog) -> float:
    """Global env step of the first positive extrinsic reward; inf if never."""
    vals = log.column("first_extrinsic_step")
    vals = vals[~np.isnan(vals)]
    return float(vals[0]) if vals.size else float("inf")


@dataclass(frozen=True)
class NoiseCollapse:
    plateau_step: int
    t_step: int
    disagreement_at_t: float
    disagreement_at_2t: float
    pred_error_at_2t: float
    noise_floor: float
    losses: np.ndarray
    disagreement: np.ndarray


def noise_collapse(cfg: RunConfig, past_plateau: int = 2000, noise_std: float = 1.0,
                   window: int = 200, plateau_tol: float = 0.05, max_plateau: int = 5000) -> NoiseCollapse:
    """Train the ensemble on targets that are pure noise, independent of the input.

    Every gradient step adds one batch of fresh transitions (a fixed probe
    input, next features drawn from N(0, noise_std^2 I)) and gives each member
    one step. The loss plateau is the first step whose trailing-window mean
    loss is within ``plateau_tol`` of the analytic floor d * noise_std^2;
    T = plateau + ``past_plateau``. Disagreement at the probe input and the
    prediction error against fresh noise are averaged over the trailing
    ``window`` steps ending at T and at 2T.
    """
    d, batch = cfg.d_feat, cfg.ensemble_batch
    floor = d * noise_std ** 2
    ens = make_ensemble(d, 1, cfg.k, (cfg.ensemble_hidden,), cfg.seed, cfg.bootstrap_keep)
    buf = ReplayBuffer(cfg.buffer_capacity, d, cfg.k, cfg.bootstrap_keep,
                       stream(cfg.seed, "bootstrap-masks"))
    noise = stream(cfg.seed, "noise-targets")
    probe = stream(cfg.seed, "noise-probe").normal(size=(1, d))
    feats = np.repeat(probe, batch, axis=0)
    actions = np.zeros(batch, dtype=np.int64)
    losses, dis, pe = [], [], []
    plateau = None
    step = 0
    while True:
        step += 1
        buf.add(feats, actions, noise_std * noise.normal(size=(batch, d)), np.full(batch, step))
        ens, member_losses = train_ensemble(ens, buf, batch, 1, cfg.ensemble_lr, buf.capacity, step)
        losses.append(float(np.mean(member_losses)))
        preds = predict_all(ens, probe, actions[:1])
        dis.append(float(disagreement_reward(preds)[0]))
        pe.append(float(prediction_error_reward(preds, noise_std * noise.normal(size=(1, d)))[0]))
        if plateau is None and step >= window and np.mean(losses[-window:]) <= floor * (1 + plateau_tol):
            plateau = step
        if plateau is None and step >= max_plateau:
            raise RuntimeError(f"loss did not reach the noise floor within {max_plateau} steps")
        if plateau is not None and step >= 2 * (plateau + past_plateau):
            break
    t = plateau + past_plateau
    dis_arr = np.array(dis)
    return NoiseCollapse(
        plateau_step=plateau,
        t_step=t,
        disagreement_at_t=float(dis_arr[t - window:t].mean()),
        disagreement_at_2t=float(dis_arr[2 * t - window:2 * t].mean()),
        pred_error_at_2t=float(np.mean(pe[2 * t - window:2 * t])),
        noise_floor=floor,
        losses=np.array(losses),
        disagreement=dis_arr,
    )
