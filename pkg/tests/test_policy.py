import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disagree.diffcore import Adam, Layer, MlpParams, Sgd, Tape, check_gradient, ops, tree_leaves, value_of
from disagree.intrinsic import make_ensemble
from disagree.policy import (RolloutBatch, act, combined_update, compute_gae, differentiable_explore_update,
                             discounted_returns, imagined_objective, make_batch, make_policy, policy_logits,
                             policy_outputs, ppo_loss, ppo_update, reinforce_loss, reinforce_update,
                             straight_through_onehot)
from disagree.policy.net import PolicyNet
from disagree.rng import stream


def fixed_logits_policy(logits, d_in=3, hidden=4):
    """Policy whose logits ignore the input."""
    logits = np.asarray(logits, dtype=np.float64)
    trunk = MlpParams((Layer(np.zeros((d_in, hidden)), np.zeros(hidden), "tanh"),))
    head = MlpParams((Layer(np.zeros((hidden, len(logits))), logits, "identity"),))
    value = MlpParams((Layer(np.zeros((hidden, 1)), np.zeros(1), "identity"),))
    return PolicyNet(trunk, head, value)


def same_params(a, b):
    return all(np.array_equal(x, y) for x, y in zip(tree_leaves(a), tree_leaves(b)))


def probs_of(policy, obs):
    return ops.softmax(policy_logits(policy, obs))


# ------------------------------------------------------------------ act


def test_act_forced_logits_picks_action_zero():
    pol = fixed_logits_policy([100.0, 0.0, 0.0])
    a, lp, v = act(pol, np.zeros((1000, 3)), stream(0, "t"))
    assert np.mean(a == 0) > 0.99
    assert lp.shape == v.shape == (1000,)


def test_act_uniform_logits_is_uniform():
    pol = fixed_logits_policy(np.zeros(4))
    a, _, _ = act(pol, np.zeros((10_000, 3)), stream(1, "t"))
    freq = np.bincount(a, minlength=4) / len(a)
    assert 0.5 * np.abs(freq - 0.25).sum() < 0.05


def test_act_is_deterministic_given_rng_state():
    pol = make_policy(5, 3, seed=2)
    obs = stream(0, "obs").normal(size=(64, 5))
    a1, lp1, v1 = act(pol, obs, stream(9, "act"))
    a2, lp2, v2 = act(pol, obs, stream(9, "act"))
    assert np.array_equal(a1, a2) and np.array_equal(lp1, lp2) and np.array_equal(v1, v2)


def test_act_logprob_matches_softmax():
    pol = make_policy(5, 3, seed=3)
    obs = stream(0, "obs").normal(size=(16, 5))
    a, lp, _ = act(pol, obs, stream(0, "act"))
    p = probs_of(pol, obs)
    np.testing.assert_allclose(lp, np.log(p[np.arange(16), a]), rtol=1e-12)


# ------------------------------------------------------------------ advantages


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(1, 4), st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
def test_gae_lambda_one_without_values_is_monte_carlo(T, N, gamma, seed):
    rng = np.random.default_rng(seed)
    rewards = rng.normal(size=(T, N))
    dones = rng.random((T, N)) < 0.2
    zeros = np.zeros((T, N))
    adv, ret = compute_gae(rewards, zeros, dones, np.zeros(N), gamma, 1.0)
    mc = discounted_returns(rewards, dones, gamma)
    np.testing.assert_allclose(adv, mc, atol=1e-10, rtol=0)
    np.testing.assert_allclose(ret, mc, atol=1e-10, rtol=0)


def test_gae_hand_example():
    # two steps, no termination, gamma 0.5, lambda 0.5
    r = np.array([[1.0], [2.0]])
    v = np.array([[0.5], [1.0]])
    adv, _ = compute_gae(r, v, np.zeros((2, 1), bool), np.array([4.0]), 0.5, 0.5)
    d1 = 2.0 + 0.5 * 4.0 - 1.0
    d0 = 1.0 + 0.5 * 1.0 - 0.5
    np.testing.assert_allclose(adv[:, 0], [d0 + 0.25 * d1, d1])


@pytest.mark.parametrize("gamma,lam", [(-0.1, 0.9), (0.9, 1.1)])
def test_batch_rejects_bad_discount(gamma, lam):
    with pytest.raises(ValueError):
        RolloutBatch(np.zeros((1, 2)), np.zeros(1, int), np.zeros(1), np.zeros(1), np.zeros(1),
                     np.zeros(1, bool), np.zeros(1), np.zeros(1), gamma, lam)


def test_batch_rejects_ragged_fields():
    with pytest.raises(ValueError, match="logprobs"):
        RolloutBatch(np.zeros((2, 2)), np.zeros(2, int), np.zeros(1), np.zeros(2), np.zeros(2),
                     np.zeros(2, bool), np.zeros(2), np.zeros(2))


# ------------------------------------------------------------------ PPO


def bandit_batch(policy, n, rng, monte_carlo=False, offset=0.0):
    obs = np.ones((n, 3))
    a, lp, v = act(policy, obs, rng)
    r = offset + (a == 1)
    return make_batch(obs[:, None], a[:, None], lp[:, None], v[:, None], r[:, None],
                      np.ones((n, 1), bool), np.zeros(1), monte_carlo=monte_carlo)


def test_ppo_zero_advantage_leaves_policy_unchanged():
    pol = make_policy(3, 2, seed=0)
    obs = stream(0, "obs").normal(size=(128, 3))
    a, lp, v = act(pol, obs, stream(0, "act"))
    batch = RolloutBatch(obs, a, lp, v, np.zeros(128), np.zeros(128, bool), np.zeros(128), v.copy())
    new, diag = ppo_update(pol, batch, Adam(1e-2), stream(0, "mb"), ent_coef=0.0)
    assert same_params(pol, new)
    assert diag["clip_frac"] == 0.0


def test_ppo_bandit_probability_rises_monotonically():
    pol = make_policy(3, 2, seed=0)
    opt, rng = Adam(3e-3), stream(0, "bandit")
    x = np.ones((1, 3))
    history = [probs_of(pol, x)[0, 1]]
    while history[-1] <= 0.9:
        pol, _ = ppo_update(pol, bandit_batch(pol, 256, rng), opt, rng)
        history.append(probs_of(pol, x)[0, 1])
        assert len(history) < 60
    assert np.all(np.diff(history) > 0)


@pytest.mark.parametrize("adv_sign,ratio", [(1.0, 2.0), (-1.0, 0.5)])
def test_ppo_clipped_samples_have_zero_surrogate_gradient(adv_sign, ratio):
    pol = make_policy(3, 2, seed=4)
    obs = np.ones((1, 3))
    p = probs_of(pol, obs)[0, 0]
    batch = RolloutBatch(obs, np.array([0]), np.array([np.log(p / ratio)]), np.zeros(1), np.zeros(1),
                         np.zeros(1, bool), np.array([adv_sign]), np.zeros(1))
    tape = Tape()
    w = tape.watch(pol)
    loss, diag = ppo_loss(w, batch, np.array([adv_sign]), 0.2, vf_coef=0.0, ent_coef=0.0)
    assert diag["clip_frac"] == 1.0
    assert all(np.all(g == 0) for g in tree_leaves(tape.grad(loss, w)))


def test_ppo_unclipped_sample_has_gradient():
    pol = make_policy(3, 2, seed=4)
    obs = np.ones((1, 3))
    p = probs_of(pol, obs)[0, 0]
    batch = RolloutBatch(obs, np.array([0]), np.array([np.log(p)]), np.zeros(1), np.zeros(1),
                         np.zeros(1, bool), np.ones(1), np.zeros(1))
    tape = Tape()
    w = tape.watch(pol)
    loss, _ = ppo_loss(w, batch, np.ones(1), 0.2, vf_coef=0.0, ent_coef=0.0)
    assert any(np.any(g != 0) for g in tree_leaves(tape.grad(loss, w)))


def test_ppo_skips_non_finite_loss(caplog):
    pol = make_policy(3, 2, seed=0)
    obs = np.ones((4, 3))
    a, lp, v = act(pol, obs, stream(0, "a"))
    batch = RolloutBatch(obs, a, lp, v, np.zeros(4), np.zeros(4, bool), np.ones(4), np.full(4, np.inf))
    new, diag = ppo_update(pol, batch, Adam(1e-2), stream(0, "mb"), epochs=1)
    assert same_params(pol, new)
    assert diag["skipped"] == 1
    assert "non-finite" in caplog.text


# ------------------------------------------------------------------ REINFORCE


def test_reinforce_return_equal_to_baseline_is_no_op():
    pol = make_policy(3, 2, seed=0)
    obs = np.ones((64, 3))
    a, lp, v = act(pol, obs, stream(0, "a"))
    batch = RolloutBatch(obs, a, lp, v, np.full(64, 0.7), np.ones(64, bool), np.full(64, 0.7), np.full(64, 0.7))
    new, base, _ = reinforce_update(pol, batch, Adam(1e-2), baseline=0.7)
    assert same_params(pol, new)
    assert base == pytest.approx(0.7)


def test_reinforce_bandit_converges_with_higher_gradient_variance_than_ppo():
    # rewards carry a positive offset, as intrinsic rewards do; with zero
    # offset and an exact baseline the two estimators are comparable
    x = np.ones((1, 3))
    rng = stream(0, "bandit-r")
    pol, opt, base, rvar = make_policy(3, 2, seed=0), Adam(1e-3), None, []
    while probs_of(pol, x)[0, 1] <= 0.9:
        batch = bandit_batch(pol, 256, rng, monte_carlo=True, offset=4.0)
        pol, base, diag = reinforce_update(pol, batch, opt, base)
        rvar.append(diag["grad_var"])
        assert len(rvar) < 200

    rng = stream(0, "bandit-p")
    pol, opt, pvar = make_policy(3, 2, seed=0), Adam(1e-3), []
    while probs_of(pol, x)[0, 1] <= 0.9:
        pol, diag = ppo_update(pol, bandit_batch(pol, 256, rng, offset=4.0), opt, rng)
        pvar.append(diag["grad_var"])
        assert len(pvar) < 200
    assert np.mean(rvar) > 2 * np.mean(pvar)


def test_score_gradient_vanishes_as_policy_becomes_greedy():
    norms = []
    for scale in (1.0, 5.0, 10.0, 20.0):
        pol = fixed_logits_policy([scale, 0.0, 0.0])
        tape = Tape()
        w = tape.watch(pol)
        loss = reinforce_loss(w, np.zeros((1, 3)), np.array([0]), np.ones(1))
        g = tape.grad(loss, w)
        norms.append(np.linalg.norm(g.logits_head.layers[0].bias))
    assert np.all(np.diff(norms) < 0)
    assert norms[-1] < 1e-8


# ------------------------------------------------------------------ straight-through


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=12), st.integers(0, 2**31 - 1))
def test_straight_through_forward_is_exactly_one_hot(logits, seed):
    out, idx = straight_through_onehot(np.array([logits]), stream(seed, "st"))
    v = value_of(out)[0]
    assert np.sum(v == 1.0) == 1 and np.sum(v == 0.0) == len(logits) - 1
    assert v[idx[0]] == 1.0


def test_straight_through_backward_equals_softmax_backward():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(5, 6))
    w = rng.normal(size=(5, 6))
    t1 = Tape()
    l1 = t1.variable(logits)
    out, _ = straight_through_onehot(l1, stream(0, "st"))
    g_st = t1.grad(ops.reduce_sum(ops.mul(out, w)), l1)
    t2 = Tape()
    l2 = t2.variable(logits)
    g_soft = t2.grad(ops.reduce_sum(ops.mul(ops.softmax(l2), w)), l2)
    assert np.array_equal(g_st, g_soft)
    report = check_gradient(lambda p: ops.reduce_sum(ops.mul(ops.softmax(p), w)), logits)
    assert report.passed


def test_straight_through_same_rng_same_sample():
    logits = np.random.default_rng(1).normal(size=(20, 7))
    _, a = straight_through_onehot(logits, stream(3, "st"))
    _, b = straight_through_onehot(logits, stream(3, "st"))
    assert np.array_equal(a, b)


# ------------------------------------------------------------------ differentiable exploration


def identical_ensemble(d_feat, n_act, k=3):
    ens = make_ensemble(d_feat, n_act, k=k, seed=0)
    return dataclasses.replace(ens, members=(ens.members[0],) * k)


def test_identical_members_give_zero_gradient_and_no_change():
    pol = make_policy(4, 3, seed=0)
    ens = identical_ensemble(4, 3)
    feats = stream(0, "f").normal(size=(32, 4))
    new, diag = differentiable_explore_update(pol, ens, feats, 2, Adam(1e-2), stream(0, "st"))
    assert diag["objective"] == 0.0
    assert same_params(pol, new)


def action_one_disagreement_ensemble(d_feat=3, k=4):
    """Members equal except for the weights read from the action-1 input."""
    ens = identical_ensemble(d_feat, 2, k)
    rng = np.random.default_rng(0)
    members = []
    for m in ens.members:
        first = m.layers[0]
        w = np.array(first.weight)
        w[d_feat + 1] += rng.normal(size=w.shape[1])
        members.append(MlpParams((Layer(w, first.bias, first.activation),) + m.layers[1:]))
    return dataclasses.replace(ens, members=tuple(members))


def test_higher_disagreement_action_gains_probability():
    ens = action_one_disagreement_ensemble()
    pol = make_policy(3, 2, seed=1)
    feats = stream(0, "f").normal(size=(256, 3))
    before = probs_of(pol, feats)[:, 1]
    new, _ = differentiable_explore_update(pol, ens, feats, 1, Sgd(0.5), stream(0, "st"))
    after = probs_of(new, feats)[:, 1]
    assert np.all(after > before)


def test_update_never_modifies_the_ensemble_or_the_env():
    from disagree.envs import make_env

    env = make_env("sticky-chain", seed=0)
    env.reset()
    steps = env.steps_taken
    ens = make_ensemble(32, 2, seed=0)
    snapshot = [np.array(x, copy=True) for x in tree_leaves(ens.members)]
    pol = make_policy(32, 2, seed=0)
    feats = np.eye(32)
    differentiable_explore_update(pol, ens, feats, 3, Adam(1e-2), stream(0, "st"), steps=2)
    assert all(np.array_equal(a, b) for a, b in zip(snapshot, tree_leaves(ens.members)))
    assert env.steps_taken == steps


def test_horizon_below_one_rejected():
    with pytest.raises(ValueError, match="horizon"):
        differentiable_explore_update(make_policy(2, 2), make_ensemble(2, 2), np.zeros((1, 2)), 0,
                                      Adam(1e-3), stream(0, "st"))


def test_imagined_rollout_starts_from_real_features():
    pol = make_policy(3, 2, seed=0)
    ens = make_ensemble(3, 2, seed=0)
    feats = stream(0, "f").normal(size=(8, 3))
    total, rewards = imagined_objective(pol, ens, feats, 1, 0.9, None, relaxed=True)
    from disagree.intrinsic import disagreement_reward, predict_all

    direct = disagreement_reward(predict_all(ens, feats, probs_of(pol, feats))).mean()
    assert rewards[0] == pytest.approx(direct, rel=1e-12)
    assert float(value_of(total)) == pytest.approx(direct, rel=1e-12)


# ------------------------------------------------------------------ combined


def combined_fixture(n=128):
    pol = make_policy(4, 3, seed=0)
    ens = make_ensemble(4, 3, seed=1)
    obs = stream(0, "obs").normal(size=(n, 4))
    a, lp, v = act(pol, obs, stream(0, "a"))
    r = stream(0, "r").normal(size=n)
    batch = make_batch(obs[:, None], a[:, None], lp[:, None], v[:, None], r[:, None],
                       np.zeros((n, 1), bool), np.zeros(1))
    return pol, ens, batch, obs


def test_mix_zero_matches_ppo():
    pol, ens, batch, obs = combined_fixture()
    p1, _ = ppo_update(pol, batch, Adam(1e-3), stream(0, "mb"))
    p2, _ = combined_update(pol, ens, batch, obs, 0.0, Adam(1e-3), stream(0, "mb"), stream(0, "st"))
    assert same_params(p1, p2)


def test_mix_one_matches_differentiable():
    pol, ens, batch, obs = combined_fixture()
    n_steps = 4 * int(np.ceil(len(batch) / 64))
    p1, _ = differentiable_explore_update(pol, ens, obs, 1, Adam(1e-3), stream(0, "st"), steps=n_steps)
    p2, _ = combined_update(pol, ens, batch, obs, 1.0, Adam(1e-3), stream(0, "mb"), stream(0, "st"))
    assert same_params(p1, p2)


def test_mix_half_is_average_of_single_sgd_steps():
    pol, ens, batch, obs = combined_fixture()
    kw = dict(epochs=1, minibatch=len(batch))
    p_ppo, _ = combined_update(pol, ens, batch, obs, 0.0, Sgd(0.1), stream(0, "mb"), stream(0, "st"), **kw)
    p_diff, _ = combined_update(pol, ens, batch, obs, 1.0, Sgd(0.1), stream(0, "mb"), stream(0, "st"), **kw)
    p_mix, _ = combined_update(pol, ens, batch, obs, 0.5, Sgd(0.1), stream(0, "mb"), stream(0, "st"), **kw)
    for base, a, b, m in zip(*(tree_leaves(p) for p in (pol, p_ppo, p_diff, p_mix))):
        np.testing.assert_allclose(m - base, 0.5 * ((a - base) + (b - base)), atol=1e-12)


@pytest.mark.parametrize("mix", [-0.1, 1.5])
def test_mix_outside_unit_interval_rejected(mix):
    pol, ens, batch, obs = combined_fixture(16)
    with pytest.raises(ValueError, match="mix"):
        combined_update(pol, ens, batch, obs, mix, Adam(1e-3), stream(0, "mb"), stream(0, "st"))


def test_policy_value_head_shape():
    pol = make_policy(4, 3)
    logits, value = policy_outputs(pol, np.zeros((7, 4)))
    assert logits.shape == (7, 3) and value.shape == (7,)
