import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgcn.autodiff import (GradientError, ShapeError, Tensor, absolute, add,
                           concat_cols, concat_rows, exp, matmul, mul, neg,
                           no_grad, reshape, scale, slice_cols, softmax_rows,
                           square, sub, take_rows, tanh, transpose)

from conftest import fd_gradients, rand_tensor


# -- forward values -----------------------------------------------------------


def test_matmul_identity_is_bitwise_exact(rng):
    x = rng.uniform(-2, 2, size=(4, 4))
    out = matmul(Tensor(np.eye(4)), Tensor(x))
    assert np.array_equal(out.data, x)


def test_matmul_hand_computed():
    out = matmul(Tensor([[1, 2], [3, 4]]), Tensor([[5], [6]]))
    assert np.array_equal(out.data, [[17], [39]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))


def test_add_zero_case():
    out = add(Tensor([[1.0, 2.0]]), Tensor([[0.0, 0.0]]))
    assert np.array_equal(out.data, [[1.0, 2.0]])


def test_add_trailing_bias_vector():
    out = add(Tensor([[1, 2], [3, 4]]), Tensor([10, 20]))
    assert np.array_equal(out.data, [[11, 22], [13, 24]])


def test_add_incompatible_shapes():
    with pytest.raises(ShapeError):
        add(Tensor(np.zeros((2, 2))), Tensor(np.zeros((3, 2))))


def test_tanh_values():
    assert tanh(Tensor([[0.0]])).item() == 0.0
    assert tanh(Tensor([[1.0]])).item() == pytest.approx(math.tanh(1.0), abs=1e-15)


def test_tanh_gradient_at_zero_is_one():
    x = Tensor([[0.0]], requires_grad=True)
    tanh(x).sum().backward()
    assert x.grad[0, 0] == 1.0


def test_softmax_uniform_rows():
    out = softmax_rows(Tensor([[3.7, 3.7, 3.7]]))
    assert np.allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)


def test_softmax_closed_form():
    out = softmax_rows(Tensor([[0.0, math.log(3.0)]]))
    assert np.allclose(out.data, [[0.25, 0.75]], atol=1e-12)


def test_concat_cols_definition():
    out = concat_cols(Tensor([[1.0], [2.0]]), Tensor([[3.0], [4.0]]))
    assert np.array_equal(out.data, [[1, 3], [2, 4]])


def test_mean_value():
    assert Tensor([[2.0, 4.0], [6.0, 8.0]]).mean().item() == 5.0


def test_slice_cols_out_of_range():
    with pytest.raises(IndexError):
        slice_cols(Tensor(np.zeros((2, 3))), 1, 5)


def test_take_rows_out_of_range():
    with pytest.raises(IndexError):
        take_rows(Tensor(np.zeros((2, 3))), [0, 2])


def test_reshape_size_mismatch():
    with pytest.raises(ShapeError):
        reshape(Tensor(np.zeros((2, 3))), (4, 2))


# -- backward contracts ---------------------------------------------------------


def test_backward_requires_scalar():
    x = Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(GradientError):
        (x + x).backward()


def test_sum_gradient_is_ones():
    w = Tensor(np.arange(4.0).reshape(2, 2), requires_grad=True)
    w.sum().backward()
    assert np.array_equal(w.grad, np.ones((2, 2)))


def test_square_gradient_is_2w():
    w = Tensor([[1.5, -2.0], [0.5, 3.0]], requires_grad=True)
    square(w).sum().backward()
    assert np.allclose(w.grad, 2.0 * w.data, atol=1e-15)


def test_bias_broadcast_gradient_counts_rows():
    a = Tensor(np.zeros((2, 2)), requires_grad=True)
    b = Tensor(np.zeros(2), requires_grad=True)
    add(a, b).sum().backward()
    assert np.array_equal(b.grad, [2.0, 2.0])


def test_repeated_backward_accumulates():
    w = Tensor([[1.0, 2.0]], requires_grad=True)
    loss = w.sum()
    loss.backward()
    loss.backward()
    assert np.array_equal(w.grad, [[2.0, 2.0]])


def test_abs_subgradient_at_zero_is_zero():
    x = Tensor([[0.0, -1.0, 2.0]], requires_grad=True)
    absolute(x).sum().backward()
    assert np.array_equal(x.grad, [[0.0, -1.0, 1.0]])


def test_no_grad_blocks_recording():
    x = Tensor([[1.0]], requires_grad=True)
    with no_grad():
        y = tanh(x)
    assert y._vjp is None and not y.requires_grad


def test_shared_node_gradient_accumulates_once_per_use():
    x = Tensor([[3.0]], requires_grad=True)
    (mul(x, x)).sum().backward()  # d(x*x)/dx = 2x
    assert np.allclose(x.grad, [[6.0]])


# -- finite-difference checks over every primitive -------------------------------


def test_matmul_grad_matches_finite_differences(rng):
    a = rand_tensor(rng, (3, 3))
    b = rand_tensor(rng, (3, 3))
    fd_gradients(lambda: matmul(a, b).sum(), [a, b])


def test_softmax_grad_matches_finite_differences(rng):
    x = rand_tensor(rng, (2, 4))
    w = Tensor(rng.uniform(-1, 1, size=(2, 4)))
    fd_gradients(lambda: mul(softmax_rows(x), w).sum(), [x])


@pytest.mark.parametrize("name", [
    "matmul", "add", "add_bias", "sub", "mul", "scale", "neg", "tanh", "exp",
    "absolute", "square", "softmax", "transpose", "reshape", "concat_cols",
    "concat_rows", "slice_cols", "take_rows", "sum", "mean",
])
def test_primitive_gradients_match_finite_differences(name, rng):
    a = rand_tensor(rng, (3, 4))
    b = rand_tensor(rng, (3, 4))
    b_t = rand_tensor(rng, (4, 3))
    bias = rand_tensor(rng, (4,))
    w = Tensor(rng.uniform(-1, 1, size=(3, 4)))
    w_sq = Tensor(rng.uniform(-1, 1, size=(3, 3)))
    w_wide = Tensor(rng.uniform(-1, 1, size=(3, 8)))
    w_tall = Tensor(rng.uniform(-1, 1, size=(6, 4)))
    w_slice = Tensor(rng.uniform(-1, 1, size=(3, 2)))
    builders = {
        "matmul": (lambda: mul(matmul(a, b_t), w_sq).sum(), [a, b_t]),
        "add": (lambda: mul(add(a, b), w).sum(), [a, b]),
        "add_bias": (lambda: mul(add(a, bias), w).sum(), [a, bias]),
        "sub": (lambda: mul(sub(a, b), w).sum(), [a, b]),
        "mul": (lambda: mul(mul(a, b), w).sum(), [a, b]),
        "scale": (lambda: mul(scale(a, 1.7), w).sum(), [a]),
        "neg": (lambda: mul(neg(a), w).sum(), [a]),
        "tanh": (lambda: mul(tanh(a), w).sum(), [a]),
        "exp": (lambda: mul(exp(a), w).sum(), [a]),
        "absolute": (lambda: mul(absolute(a), w).sum(), [a]),
        "square": (lambda: mul(square(a), w).sum(), [a]),
        "softmax": (lambda: mul(softmax_rows(a), w).sum(), [a]),
        "transpose": (lambda: mul(transpose(a), transpose(w)).sum(), [a]),
        "reshape": (lambda: mul(reshape(a, (4, 3)), reshape(w, (4, 3))).sum(), [a]),
        "concat_cols": (lambda: mul(concat_cols(a, b), w_wide).sum(), [a, b]),
        "concat_rows": (lambda: mul(concat_rows(a, b), w_tall).sum(), [a, b]),
        "slice_cols": (lambda: mul(slice_cols(a, 1, 3), w_slice).sum(), [a]),
        "take_rows": (lambda: mul(take_rows(a, [2, 0, 0]), w).sum(), [a]),
        "sum": (lambda: a.sum(), [a]),
        "mean": (lambda: a.mean(), [a]),
    }
    build, inputs = builders[name]
    fd_gradients(build, inputs)


# -- properties -------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-50, 50), min_size=2, max_size=6),
                min_size=1, max_size=5).filter(
                    lambda rows: len({len(r) for r in rows}) == 1))
def test_softmax_rows_sum_to_one_and_lie_in_unit_interval(rows):
    out = softmax_rows(Tensor(rows)).data
    assert np.all(out >= 0.0) and np.all(out <= 1.0)
    assert np.max(np.abs(out.sum(axis=1) - 1.0)) < 1e-12


def test_tape_determinism_bitwise():
    def run():
        r = np.random.default_rng(7)
        a = Tensor(r.uniform(-1, 1, (5, 5)), requires_grad=True)
        b = Tensor(r.uniform(-1, 1, (5, 5)), requires_grad=True)
        loss = mul(tanh(matmul(a, b)), softmax_rows(b)).sum()
        loss.backward()
        return a.grad.copy(), b.grad.copy()

    ga1, gb1 = run()
    ga2, gb2 = run()
    assert np.array_equal(ga1, ga2) and np.array_equal(gb1, gb2)


def test_ops_produce_finite_values(rng):
    x = rand_tensor(rng, (4, 4))
    for out in (tanh(x), softmax_rows(x), square(x), absolute(x)):
        assert np.all(np.isfinite(out.data))
