"""Checks run by ``disagree selftest``: environments, gradients and the reward oracle."""

from __future__ import annotations

import numpy as np

from .diffcore import check_gradient, forward, init_mlp, ops
from .diffcore.opcases import op_max_rel_error
from .diffcore.ops import OP_KINDS
from .envs.selftest import Check
from .envs.selftest import run_all as env_checks
from .intrinsic import ReplayBuffer, disagreement_reward, make_ensemble, model_input, predict_all, train_ensemble
from .intrinsic.oracle import compare_once
from .policy import RolloutBatch, imagined_objective, make_policy, ppo_loss, reinforce_loss
from .rng import stream

GRAD_TOL = 1e-4
ORACLE_TOL = 1e-10


def op_checks(seed: int = 0) -> list[Check]:
    out = []
    for i, kind in enumerate(OP_KINDS):
        err = op_max_rel_error(kind, stream(seed, "selftest/ops", i))
        out.append(Check(f"gradient: op {kind}", err < GRAD_TOL, f"max rel err {err:.2e}"))
    return out


def _small_setup(seed: int):
    rng = stream(seed, "selftest/modules")
    d, n_act = 4, 3
    ens = make_ensemble(d, n_act, k=3, hidden=(6,), seed=seed)
    policy = make_policy(d, n_act, hidden=5, seed=seed)
    feats = rng.normal(size=(6, d))
    return rng, d, n_act, ens, policy, feats


def module_loss_checks(seed: int = 0) -> list[Check]:
    """Gradient checks for every loss the modules optimize, including the
    multi-step imagined objective along its smooth path."""
    rng, d, n_act, ens, policy, feats = _small_setup(seed)
    actions = rng.integers(0, n_act, size=len(feats))
    targets = rng.normal(size=feats.shape)
    x = model_input(feats, actions, n_act)
    mlp = init_mlp([4, 5, 2], ["tanh", "identity"], rng)
    xin, yin = rng.normal(size=(5, 4)), rng.normal(size=(5, 2))
    logp_old = np.log(rng.uniform(0.2, 0.5, size=len(feats)))
    batch = RolloutBatch(feats, actions, logp_old, np.zeros(len(feats)), np.zeros(len(feats)),
                         np.zeros(len(feats), bool), rng.normal(size=len(feats)), rng.normal(size=len(feats)))
    weights = rng.normal(size=len(feats))
    onehot = ops.softmax(rng.normal(size=(len(feats), n_act)))
    masks = [(rng.random((len(feats), 6)) < 0.8) / 0.8]
    cases = {
        "mlp mse": (lambda p: ops.reduce_mean(ops.sq_norm(ops.sub(forward(p, xin), yin))), mlp),
        "ensemble member regression": (
            lambda p: ops.reduce_mean(ops.sq_norm(ops.sub(forward(p, x), targets))), ens.members[0]),
        "dropout member regression": (
            lambda p: ops.reduce_mean(ops.sq_norm(ops.sub(forward(p, x, masks), targets))), ens.members[1]),
        "disagreement wrt members": (
            lambda p: ops.reduce_sum(disagreement_reward([forward(m, x) for m in p])), list(ens.members)),
        "disagreement wrt action input": (
            lambda p: ops.reduce_sum(disagreement_reward(predict_all(ens, feats, p))), onehot),
        "ppo loss": (lambda p: ppo_loss(p, batch, batch.advantages, 0.2, 0.5, 0.01)[0], policy),
        "reinforce loss": (lambda p: reinforce_loss(p, feats, actions, weights), policy),
        "imagined objective H=3": (
            lambda p: imagined_objective(p, ens, feats, 3, 0.9, None, relaxed=True)[0], policy),
    }
    out = []
    for name, (fn, params) in cases.items():
        rep = check_gradient(fn, params, GRAD_TOL)
        out.append(Check(f"gradient: {name}", rep.passed, f"max rel err {rep.max_rel_error:.2e}"))
    return out


def oracle_checks(cases: int = 1000, seed: int = 0) -> list[Check]:
    rng = stream(seed, "selftest/oracle")
    worst, worst_perm = 0.0, 0.0
    for _ in range(cases):
        k, dim = int(rng.integers(2, 11)), int(rng.integers(1, 33))
        lib, brute, perm = compare_once(rng, k, dim)
        worst = max(worst, abs(lib - brute) / max(1.0, abs(brute)))
        worst_perm = max(worst_perm, abs(lib - perm) / max(1.0, abs(lib)))
    return [
        Check("reward oracle: brute-force variance", worst < ORACLE_TOL, f"{cases} cases, max err {worst:.2e}"),
        Check("reward oracle: permutation invariance", worst_perm < ORACLE_TOL,
              f"{cases} cases, max err {worst_perm:.2e}"),
    ]


CONVERGENCE_TOL = 1e-3


def convergence_check(seed: int = 0, steps: int = 1500) -> Check:
    """Train an ensemble on a deterministic linear task with plenty of data:
    every member's loss and the disagreement on training states must fall
    below ``CONVERGENCE_TOL``."""
    rng = stream(seed, "selftest/convergence")
    x = rng.uniform(-1, 1, size=(2048, 4))
    a = rng.integers(0, 2, len(x))
    y = 0.5 * x + np.where(a[:, None] == 1, 0.3, -0.3)
    buf = ReplayBuffer(len(x), 4, 5, 0.7, stream(seed, "selftest/convergence-masks"))
    buf.add(x, a, y, 0)
    ens, _ = train_ensemble(make_ensemble(4, 2, k=5, seed=seed), buf, 64, steps, 3e-3)
    _, losses = train_ensemble(ens, buf, 64, 1, 0.0)  # loss of the final parameters
    dis = float(np.mean(disagreement_reward(predict_all(ens, x, a))))
    ok = max(losses) < CONVERGENCE_TOL and dis < CONVERGENCE_TOL
    return Check("ensemble convergence", ok, f"worst member loss {max(losses):.2e}, disagreement {dis:.2e}")


def run_selftest(seed: int = 0) -> list[Check]:
    return [*env_checks(), *op_checks(seed), *module_loss_checks(seed), *oracle_checks(seed=seed)]
