import numpy as np
import pytest

from oracles import assert_grads_match, finite_diff
from trajgan import tensor as T
from trajgan.optim import Adam, AdamState, adam_step, clip_grad_norm, grad_norm
from trajgan.tensor import (ContractError, NumericError, ShapeError, Tape, Tensor,
                            backward, no_grad)


def leaf(arr):
    return Tensor(np.asarray(arr, dtype=float), requires_grad=True)


def rand_leaf(rng, shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


# ---------------------------------------------------------------------------
# forward values

def test_matmul_known_product():
    a = leaf([[1.0, 2.0], [3.0, 4.0]])
    b = leaf([[5.0, 6.0], [7.0, 8.0]])
    out = T.matmul(a, b)
    assert np.array_equal(out.data, [[19.0, 22.0], [43.0, 50.0]])


def test_matmul_shape_mismatch_names_both_shapes():
    a = leaf(np.zeros((2, 3)))
    b = leaf(np.zeros((4, 5)))
    with pytest.raises(ShapeError) as exc:
        T.matmul(a, b)
    assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)


def test_matmul_rejects_non_2d():
    with pytest.raises(ShapeError):
        T.matmul(leaf([1.0, 2.0]), leaf([[1.0], [2.0]]))


def test_activation_point_values():
    x = leaf([[-1.0, 0.0, 2.0]])
    assert np.array_equal(T.relu(x).data, [[0.0, 0.0, 2.0]])
    assert np.allclose(T.leaky_relu(x, 0.2).data, [[-0.2, 0.0, 2.0]])
    assert T.tanh(leaf([0.0])).data[0] == 0.0
    assert T.sigmoid(leaf([0.0])).data[0] == 0.5


def test_leaky_relu_slope_limits_exact():
    rng = np.random.default_rng(0)
    x = leaf(rng.standard_normal((5, 7)))
    assert np.array_equal(T.leaky_relu(x, 1.0).data, x.data)
    assert np.array_equal(T.leaky_relu(x, 0.0).data, T.relu(x).data)


def test_activation_dispatcher_rejects_unknown():
    with pytest.raises(ValueError):
        T.activation(leaf([1.0]), "gelu")


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = leaf(rng.standard_normal((4, 6)) * 5.0)
        s = T.softmax_rows(x).data
        assert np.allclose(s.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(s > 0.0)


def test_softmax_uniform_row():
    s = T.softmax_rows(leaf([[3.0, 3.0, 3.0, 3.0]])).data
    assert np.allclose(s, 0.25, atol=1e-15)


def test_concat_and_narrow_round_trip():
    a = leaf([[1.0, 2.0], [3.0, 4.0]])
    b = leaf([[5.0, 6.0]])
    c = T.concat([a, b], axis=0)
    assert np.array_equal(c.data, [[1, 2], [3, 4], [5, 6]])
    back = T.narrow(c, 0, 0, 2)
    assert np.array_equal(back.data, a.data)
    with pytest.raises(ShapeError):
        T.concat([a, leaf([[1.0, 2.0, 3.0]])], axis=0)
    with pytest.raises(ShapeError):
        T.narrow(a, 0, 1, 5)


def test_take_rows_and_blockwise_max_forward():
    x = leaf([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    assert np.array_equal(T.take_rows(x, [2, 0, 2]).data, [[4, 5], [0, 1], [4, 5]])
    y = leaf([[1.0, 9.0], [5.0, 2.0], [0.0, 0.0], [3.0, 4.0]])
    m = T.blockwise_max(y, 2)
    assert np.array_equal(m.data, [[5.0, 9.0], [3.0, 4.0]])
    with pytest.raises(ShapeError):
        T.blockwise_max(y, 3)


def test_broadcast_rules():
    a = leaf(np.ones((3, 4)))
    assert T.add(a, leaf(np.ones(4))).data.shape == (3, 4)
    assert T.add(a, leaf(np.ones((3, 1)))).data.shape == (3, 4)
    assert T.mul(a, leaf(2.0)).data.shape == (3, 4)
    with pytest.raises(ShapeError):
        T.add(leaf(np.ones((1, 4))), leaf(np.ones((3, 1))))


# ---------------------------------------------------------------------------
# gradients against central finite differences

def test_matmul_grads():
    rng = np.random.default_rng(2)
    a, b = rand_leaf(rng, (3, 4)), rand_leaf(rng, (4, 2))
    assert_grads_match(lambda: T.matmul(a, b).sum(), [a, b])


def test_elementwise_and_broadcast_grads():
    rng = np.random.default_rng(3)
    a, b = rand_leaf(rng, (4, 3)), rand_leaf(rng, (4, 3))
    bias = rand_leaf(rng, (3,))
    col = rand_leaf(rng, (4, 1))

    def loss():
        out = T.mul(T.add(a, bias), T.sub(b, col))
        return (out * 0.5 + 1.0).sum()

    assert_grads_match(loss, [a, b, bias, col])


@pytest.mark.parametrize("fn", [
    T.relu,
    lambda x: T.leaky_relu(x, 0.2),
    T.tanh,
    T.sigmoid,
    T.exp,
    lambda x: T.clamp_min(x, 0.1),
])
def test_unary_grads(fn):
    rng = np.random.default_rng(4)
    # keep values away from kinks so finite differences are clean
    x = Tensor(rng.uniform(0.3, 2.0, (3, 5)) * rng.choice([-1.0, 1.0], (3, 5)),
               requires_grad=True)
    assert_grads_match(lambda: fn(x).sum(), [x])


def test_positive_domain_grads():
    rng = np.random.default_rng(5)
    x = Tensor(rng.uniform(0.5, 3.0, (4, 4)), requires_grad=True)
    assert_grads_match(lambda: T.log(x).sum(), [x])
    assert_grads_match(lambda: T.sqrt(x).sum(), [x])
    assert_grads_match(lambda: T.powf(x, -0.5).sum(), [x])


def test_softmax_grads_tight():
    rng = np.random.default_rng(6)
    x = rand_leaf(rng, (3, 5))
    w = Tensor(rng.standard_normal((3, 5)), requires_grad=False)
    worst = assert_grads_match(
        lambda: T.mul(T.softmax_rows(x), w).sum(), [x], rtol=1e-5)
    assert worst < 1e-5


def test_slice_gather_grads():
    rng = np.random.default_rng(7)
    x = rand_leaf(rng, (6, 3))

    def loss():
        picked = T.take_rows(x, [0, 0, 4, 2])
        left = T.narrow(picked, 1, 0, 2)
        return T.mul(left, left).sum()

    assert_grads_match(loss, [x])


def test_blockwise_max_grads():
    rng = np.random.default_rng(8)
    x = rand_leaf(rng, (8, 3))
    assert_grads_match(lambda: T.blockwise_max(x, 4).sum(), [x])


def test_reduction_grads():
    rng = np.random.default_rng(9)
    x = rand_leaf(rng, (4, 5))
    assert_grads_match(lambda: x.sum(), [x])
    assert_grads_match(lambda: x.mean(), [x])
    assert_grads_match(lambda: x.sum(axis=0).sum(), [x])
    assert_grads_match(lambda: x.mean(axis=1, keepdims=True).sum(), [x])


def test_concat_transpose_grads():
    rng = np.random.default_rng(10)
    a, b = rand_leaf(rng, (2, 3)), rand_leaf(rng, (2, 3))

    def loss():
        c = T.concat([a, b], axis=1)
        return T.matmul(c, T.transpose(c)).sum()

    assert_grads_match(loss, [a, b])


def test_mlp_chain_grads():
    rng = np.random.default_rng(11)
    x = Tensor(rng.standard_normal((5, 4)), requires_grad=False)
    w1, b1 = rand_leaf(rng, (4, 8)), rand_leaf(rng, (8,))
    w2, b2 = rand_leaf(rng, (8, 3)), rand_leaf(rng, (3,))

    def loss():
        h = T.leaky_relu(T.add(T.matmul(x, w1), b1), 0.2)
        out = T.softmax_rows(T.add(T.matmul(h, w2), b2))
        return out.mean()

    assert_grads_match(loss, [w1, b1, w2, b2])


# ---------------------------------------------------------------------------
# backward semantics

def test_reuse_sums_both_paths():
    w = leaf([1.0, 2.0, 3.0])
    with Tape():
        loss = T.add(w.sum(), w.sum())
        backward(loss)
    assert np.array_equal(w.grad, [2.0, 2.0, 2.0])


def test_repeated_backward_accumulates():
    w = leaf([[1.0, -2.0]])
    with Tape():
        loss = T.mul(w, w).sum()
        backward(loss)
        first = w.grad.copy()
        backward(loss)
    assert np.array_equal(w.grad, 2.0 * first)


def test_backward_rejects_non_scalar():
    w = leaf([[1.0, 2.0]])
    with Tape():
        out = T.mul(w, w)
        with pytest.raises(ContractError):
            backward(out)


def test_backward_visits_each_node_once():
    rng = np.random.default_rng(12)
    w = rand_leaf(rng, (3, 3))
    with Tape() as tape:
        a = T.tanh(w)
        b = T.add(a, a)        # diamond: a used twice
        loss = T.mul(b, a).sum()
    calls = [0] * len(tape.nodes)

    def counted(i, fn):
        def wrapper(g):
            calls[i] += 1
            return fn(g)
        return wrapper

    for i, node in enumerate(tape.nodes):
        node.bwd = counted(i, node.bwd)
    backward(loss)
    assert calls == [1] * len(tape.nodes)


def test_tape_is_topologically_ordered():
    rng = np.random.default_rng(13)
    w = rand_leaf(rng, (2, 2))
    with Tape() as tape:
        out = T.sigmoid(T.matmul(w, T.tanh(w)))
        out.sum()
    for i, node in enumerate(tape.nodes):
        assert node.out.node_id == i
        for inp in node.inputs:
            if inp.tape is tape and inp.node_id is not None:
                assert inp.node_id < i


def test_no_grad_produces_constants():
    w = leaf([1.0])
    with Tape() as tape:
        with no_grad():
            out = T.tanh(w)
        assert not out.requires_grad
        assert len(tape.nodes) == 0


def test_ops_without_tape_do_not_record():
    w = leaf([1.0, 2.0])
    out = T.mul(w, w)
    assert out.tape is None and not out.requires_grad


def test_forward_is_deterministic():
    def run():
        rng = np.random.default_rng(99)
        x = Tensor(rng.standard_normal((6, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        with Tape():
            loss = T.sigmoid(T.matmul(T.tanh(x), w)).mean()
        return loss.data.copy()

    assert run().tobytes() == run().tobytes()


def test_debug_checks_catch_non_finite():
    T.set_debug_checks(True)
    try:
        with np.errstate(over="ignore"), pytest.raises(NumericError):
            T.exp(leaf([1000.0]))
    finally:
        T.set_debug_checks(False)


def test_float64_everywhere():
    x = Tensor([[1, 2], [3, 4]])
    assert x.data.dtype == np.float64
    assert T.relu(x).data.dtype == np.float64


# ---------------------------------------------------------------------------
# Adam

def test_adam_first_step_equals_lr():
    w = leaf([0.0])
    w.grad = np.array([1.0])
    adam_step([w], [AdamState((1,), lr=0.001)])
    assert abs(w.data[0] - (-0.001)) < 1e-9
    assert w.grad is None


def test_adam_zero_grad_leaves_param_unchanged():
    w = leaf([5.0, -3.0])
    w.grad = np.zeros(2)
    adam_step([w], [AdamState((2,), lr=0.1)])
    assert np.array_equal(w.data, [5.0, -3.0])


def test_adam_missing_grad_is_contract_error():
    w = leaf([1.0])
    with pytest.raises(ContractError):
        adam_step([w], [AdamState((1,))])


def test_adam_converges_on_quadratic():
    w = leaf([0.0])
    opt = Adam([w], lr=0.1)
    for _ in range(200):
        with Tape():
            diff = w - 3.0
            loss = T.mul(diff, diff).sum()
            backward(loss)
        opt.step()
    assert abs(w.data[0] - 3.0) < 1e-2


def test_grad_norm_and_clip():
    a, b = leaf([3.0]), leaf([4.0])
    a.grad, b.grad = np.array([3.0]), np.array([4.0])
    assert abs(grad_norm([a, b]) - 5.0) < 1e-12
    clip_grad_norm([a, b], 1.0)
    assert abs(grad_norm([a, b]) - 1.0) < 1e-12


def test_finite_diff_oracle_sanity():
    # the oracle itself: d/dx of x^2 at 3 is 6
    x = leaf([3.0])
    (g,) = finite_diff(lambda: float(x.data[0] ** 2), [x])
    assert abs(g[0] - 6.0) < 1e-6
