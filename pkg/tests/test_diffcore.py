import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disagree.diffcore import (
    Adam, Layer, MlpParams, NonFiniteError, ShapeError, Tape, adam_step, check_gradient,
    forward, init_mlp, load_bundle, load_params, numeric_gradient, ops, save_bundle,
    save_params, tree_leaves,
)
from disagree.diffcore.checkpoint import CheckpointError, loads_bundle
from disagree.diffcore.opcases import op_max_rel_error
from disagree.diffcore.ops import OP_KINDS


def one_layer(w, b, act="identity"):
    return MlpParams((Layer(np.asarray(w, float), np.asarray(b, float), act),))


# forward

def test_identity_layer_passes_input_through():
    out = forward(one_layer(np.eye(2), np.zeros(2)), np.array([3.0, 4.0]))
    np.testing.assert_array_equal(out, [3.0, 4.0])


def test_relu_layer_clamps_negative_preactivations():
    out = forward(one_layer(np.eye(2), np.zeros(2), "relu"), np.array([-1.0, 2.0]))
    np.testing.assert_array_equal(out, [0.0, 2.0])


def test_two_layer_forward_matches_hand_evaluation():
    w1 = np.array([[1.0, -2.0, 0.5], [0.5, 1.0, -1.0]])
    b1 = np.array([0.1, 0.2, 0.3])
    w2 = np.array([[2.0], [-1.0], [3.0]])
    b2 = np.array([-0.5])
    net = MlpParams((Layer(w1, b1, "relu"), Layer(w2, b2, "identity")))
    # hand: pre1 = [1+0.5+0.1, -2+1+0.2, 0.5-1+0.3] = [1.6, -0.8, -0.2]; relu -> [1.6, 0, 0]
    # out = 2*1.6 - 0.5 = 2.7
    np.testing.assert_allclose(forward(net, np.array([1.0, 1.0])), [2.7], rtol=0, atol=1e-15)


def test_forward_rejects_dimension_mismatch():
    net = one_layer(np.eye(2), np.zeros(2))
    with pytest.raises(ShapeError, match="fan_in=2"):
        forward(net, np.ones(3))


def test_incompatible_layers_rejected():
    with pytest.raises(ShapeError):
        MlpParams((Layer(np.ones((2, 3)), np.zeros(3)), Layer(np.ones((4, 1)), np.zeros(1))))


def test_forward_records_on_tape_and_matches_untraced_bitwise():
    rng = np.random.default_rng(0)
    net = init_mlp([5, 7, 3], ["tanh", "identity"], rng)
    x = rng.normal(size=(4, 5))
    plain = forward(net, x)
    tape = Tape()
    traced = forward(tape.watch(net), x)
    assert len(tape) > 0
    assert plain.tobytes() == traced.value.tobytes()


# backward

def test_sum_of_squares_gradient():
    tape = Tape()
    w = tape.variable([1.0, 2.0])
    out = ops.sq_norm(w)
    grads = tape.backward(out)
    np.testing.assert_allclose(grads.of(w), [2.0, 4.0])
    fd = numeric_gradient(lambda p: ops.sq_norm(p[0]), [np.array([1.0, 2.0])])[0]
    np.testing.assert_allclose(grads.of(w), fd, rtol=1e-8)


def test_constant_output_has_zero_gradient():
    tape = Tape()
    w = tape.variable([1.0, 2.0])
    c = tape.variable(3.0)
    grads = tape.backward(ops.mul(c, 2.0))
    np.testing.assert_array_equal(grads.of(w), [0.0, 0.0])


def test_dot_product_gradient_is_the_other_operand():
    tape = Tape()
    w = tape.variable([0.3, -0.7])
    out = ops.reduce_sum(ops.mul(w, np.array([3.0, 5.0])))
    np.testing.assert_array_equal(tape.backward(out).of(w), [3.0, 5.0])


def test_backward_rejects_non_scalar():
    tape = Tape()
    w = tape.variable([1.0, 2.0])
    with pytest.raises(ShapeError):
        tape.backward(ops.mul(w, 2.0))


def test_stop_gradient_blocks_flow():
    tape = Tape()
    w = tape.variable([1.0, 2.0])
    out = ops.reduce_sum(ops.mul(ops.stop_gradient(w), w))
    # d/dw sum(sg(w) * w) = sg(w)
    np.testing.assert_array_equal(tape.backward(out).of(w), [1.0, 2.0])


def test_node_ids_form_creation_ordered_dag():
    rng = np.random.default_rng(1)
    tape = Tape()
    net = tape.watch(init_mlp([3, 4, 2], ["relu", "identity"], rng))
    ops.reduce_mean(ops.sq_norm(forward(net, rng.normal(size=(2, 3)))))
    for node in tape.nodes:
        assert all(i < node.id for i in node.inputs)


def test_non_finite_result_rejected():
    with pytest.raises(NonFiniteError), np.errstate(over="ignore"):
        ops.mul(np.array([1e300]), np.array([1e300]))


# gradient checks

def _poly(p):
    x, y = p
    return ops.reduce_sum(ops.add(ops.mul(ops.mul(x, x), y), ops.mul(3.0, ops.mul(y, y))))


def test_polynomial_gradcheck():
    rng = np.random.default_rng(2)
    report = check_gradient(_poly, [rng.normal(size=3), rng.normal(size=3)], tolerance=1e-5)
    assert report.passed, report


def test_identity_linear_map_gradcheck_is_exact():
    x = np.array([0.5, -1.5, 2.0])
    net = one_layer(np.eye(3), np.zeros(3))
    report = check_gradient(lambda p: ops.reduce_sum(forward(p, x)), net, tolerance=1e-9)
    assert report.passed, report


def test_random_mlp_with_mse_head_gradcheck():
    rng = np.random.default_rng(3)
    net = init_mlp([4, 8, 3], ["relu", "identity"], rng)
    x, y = rng.normal(size=(5, 4)), rng.normal(size=(5, 3))
    report = check_gradient(lambda p: ops.reduce_mean(ops.sq_norm(ops.sub(forward(p, x), y))), net)
    assert report.max_rel_error < 1e-4, report


@pytest.mark.parametrize("kind", OP_KINDS)
def test_every_op_kind_gradchecks(kind):
    assert op_max_rel_error(kind, np.random.default_rng(4)) < 1e-4


@settings(max_examples=120, deadline=None)
@given(kind=st.sampled_from(OP_KINDS), seed=st.integers(0, 2**32 - 1))
def test_op_gradients_match_finite_differences_randomized(kind, seed):
    assert op_max_rel_error(kind, np.random.default_rng(seed)) < 1e-4, (kind, seed)


def test_batch_sum_gradient_is_sum_of_per_example_gradients():
    rng = np.random.default_rng(5)
    net = init_mlp([3, 6, 2], ["tanh", "identity"], rng)
    xs = rng.normal(size=(4, 3))

    def grad_of(x):
        tape = Tape()
        p = tape.watch(net)
        return tree_leaves(tape.grad(ops.reduce_sum(ops.sq_norm(forward(p, x))), p))

    batch = grad_of(xs)
    per = [grad_of(xs[i:i + 1]) for i in range(len(xs))]
    for j, g in enumerate(batch):
        np.testing.assert_allclose(g, sum(p[j] for p in per), rtol=1e-12, atol=1e-12)


# adam

def test_adam_zero_gradient_leaves_params_and_decays_moments():
    p = [np.array([1.0, -2.0])]
    _, state = adam_step(p, [np.array([0.5, 0.5])], None, lr=0.1)
    new_p, state2 = adam_step(p, [np.zeros(2)], state, lr=0.1)
    # m != 0 from the first step still moves params; check the moment decay itself
    np.testing.assert_allclose(state2.m[0], 0.9 * state.m[0])
    np.testing.assert_allclose(state2.v[0], 0.999 * state.v[0])
    fresh_p, fresh_state = adam_step(p, [np.zeros(2)], None, lr=0.1)
    np.testing.assert_array_equal(fresh_p[0], p[0])
    np.testing.assert_array_equal(fresh_state.m[0], 0.0)


def test_adam_first_step_moves_by_lr():
    # bias-corrected: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    g = np.array([0.3, -4.0, 1e-2])
    new, _ = adam_step([np.zeros(3)], [g], None, lr=1e-3)
    np.testing.assert_allclose(np.abs(new[0]), 1e-3 * np.abs(g) / (np.abs(g) + 1e-8), rtol=1e-12)
    np.testing.assert_allclose(np.abs(new[0]), 1e-3, rtol=1e-5)


def test_adam_is_deterministic():
    rng = np.random.default_rng(6)
    p, g = [rng.normal(size=4)], [rng.normal(size=4)]
    _, s = adam_step(p, g, None, 0.01)
    a = adam_step(p, g, s, 0.01)
    b = adam_step(p, g, s, 0.01)
    assert a[0][0].tobytes() == b[0][0].tobytes()
    assert a[1].t == b[1].t == 2


def test_adam_rejects_non_finite_gradient(caplog):
    with caplog.at_level(logging.ERROR):
        with pytest.raises(NonFiniteError, match="step 1"):
            adam_step([np.zeros(2)], [np.array([np.nan, 0.0])], None, 0.1)
    assert "step 1" in caplog.text


def test_adam_class_tracks_state():
    opt = Adam(0.1)
    p = opt.step([np.zeros(1)], [np.ones(1)])
    opt.step(p, [np.ones(1)])
    assert opt.state.t == 2


# checkpoints

def test_checkpoint_round_trip(tmp_path):
    net = init_mlp([3, 5, 2], ["relu", "tanh"], np.random.default_rng(7))
    path = tmp_path / "net.bin"
    save_params(path, net)
    back = load_params(path)
    assert [l.activation for l in back.layers] == ["relu", "tanh"]
    for a, b in zip(tree_leaves(net), tree_leaves(back)):
        assert a.tobytes() == b.tobytes()
    raw = path.read_bytes()
    assert raw[:4] == b"DXMP"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 2
    # header + per layer (3 u32 + weights + bias)
    assert len(raw) == 12 + (12 + 8 * (15 + 5)) + (12 + 8 * (10 + 2))


def test_bundle_round_trip_and_corruption(tmp_path):
    rng = np.random.default_rng(8)
    recs = {"trunk": init_mlp([2, 3], ["tanh"], rng), "head": init_mlp([3, 1], ["identity"], rng)}
    path = tmp_path / "b.bin"
    save_bundle(path, recs)
    back = load_bundle(path)
    assert list(back) == ["trunk", "head"]
    with pytest.raises(CheckpointError):
        loads_bundle(path.read_bytes()[:-3])
    with pytest.raises(CheckpointError):
        loads_bundle(b"XXXX" + path.read_bytes()[4:])
