import numpy as np
import pytest
from hypothesis import given, strategies as st

from laughcaf import numkernel as nk
from laughcaf.errors import DimensionError, NumericError
from laughcaf.numkernel import Tensor


def _param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


UNARY = {
    "row_softmax": nk.row_softmax,
    "log_softmax": nk.log_softmax,
    "gelu": nk.gelu,
    "layer_norm": nk.layer_norm,
    "mean_rows": nk.mean_rows,
    "transpose": nk.transpose,
    "exp": nk.exp,
    "row_normalize": nk.row_normalize,
    "scale": lambda a: nk.scale(a, -2.5),
    "dropout": lambda a: nk.dropout(a, 0.3, seed=4, train=True),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name):
    rng = np.random.default_rng(0)
    x = _param(rng, 3, 5)
    w = rng.standard_normal(UNARY[name](x).shape)
    err = nk.grad_check(lambda: nk.sum_all(nk.mul(UNARY[name](x), w)), [x])
    assert err < 1e-5


def test_log_gradient_on_positive_inputs():
    rng = np.random.default_rng(1)
    x = Tensor(rng.uniform(0.5, 2.0, (3, 4)), requires_grad=True)
    assert nk.grad_check(lambda: nk.sum_all(nk.log(x)), [x]) < 1e-6


@pytest.mark.parametrize("shapes", [((3, 4), (4, 2)), ((2, 3, 4), (4, 5)), ((2, 3, 4), (2, 4, 3))])
def test_matmul_gradients(shapes):
    rng = np.random.default_rng(2)
    a, b = _param(rng, *shapes[0]), _param(rng, *shapes[1])
    err = nk.grad_check(lambda: nk.sum_all(nk.gelu(nk.matmul(a, b))), [a, b])
    assert err < 1e-5


def test_broadcast_add_mul_gradients():
    rng = np.random.default_rng(3)
    a, bias, g = _param(rng, 2, 3, 4), _param(rng, 4), _param(rng, 4)
    err = nk.grad_check(lambda: nk.sum_all(nk.gelu(nk.mul(nk.add(a, bias), g))), [a, bias, g])
    assert err < 1e-5


def test_concat_and_cosine_gradients():
    rng = np.random.default_rng(4)
    a, b = _param(rng, 2, 3), _param(rng, 4, 3)
    x, y = _param(rng, 5, 6), _param(rng, 5, 6)
    assert nk.grad_check(lambda: nk.sum_all(nk.gelu(nk.concat_rows([a, b]))), [a, b]) < 1e-5
    w = rng.standard_normal((5, 5))
    assert nk.grad_check(lambda: nk.sum_all(nk.mul(nk.cosine_similarity(x, y), w)), [x, y]) < 1e-5


def test_mismatched_trailing_dims_raise():
    with pytest.raises(DimensionError):
        nk.add(np.ones((2, 3)), np.ones(4))
    with pytest.raises(DimensionError):
        nk.matmul(np.ones((2, 3)), np.ones((4, 2)))


def test_softmax_rows_sum_to_one_and_are_shift_invariant():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 7)) * 30
    s = nk.row_softmax(x).data
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(nk.row_softmax(x + 100.0).data, s, atol=1e-12)


def test_layer_norm_of_zero_vector_is_zero():
    np.testing.assert_array_equal(nk.layer_norm(np.zeros((2, 5))).data, 0.0)


def test_gelu_frozen_values():
    # tanh approximation evaluated by hand
    got = nk.gelu(np.array([-1.0, 0.0, 1.0, 2.0])).data
    np.testing.assert_allclose(got, [-0.15880801, 0.0, 0.84119199, 1.95459769], atol=1e-7)


def test_dropout_eval_is_identity_and_train_is_seeded():
    x = np.ones((50, 40))
    np.testing.assert_array_equal(nk.dropout(x, 0.5, 1, train=False).data, x)
    a = nk.dropout(x, 0.5, 7).data
    np.testing.assert_array_equal(a, nk.dropout(x, 0.5, 7).data)
    assert set(np.unique(a)) <= {0.0, 2.0}
    assert abs(a.mean() - 1.0) < 0.1


def test_dtype_is_preserved():
    x = Tensor(np.ones((2, 3), np.float32))
    w = Tensor(np.ones((3, 2), np.float32))
    y = nk.layer_norm(nk.gelu(nk.matmul(x, w)))
    assert y.data.dtype == np.float32


def test_backward_accumulates_over_shared_nodes():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    y = nk.mul(x, x)  # x used twice
    nk.sum_all(nk.add(y, x)).backward()
    assert x.grad[0, 0] == pytest.approx(5.0)


def test_grad_check_of_constant_function_is_zero():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    assert nk.grad_check(lambda: nk.sum_all(Tensor(np.ones(3))), [x]) == 0.0


def test_grad_check_restores_parameters():
    x = Tensor(np.ones((2, 2), np.float32), requires_grad=True)
    nk.grad_check(lambda: nk.sum_all(nk.exp(x)), [x])
    assert x.data.dtype == np.float32 and x.grad is None


def test_adam_matches_closed_form_first_steps():
    p = np.array([1.0, -2.0])
    g = np.array([0.5, -0.25])
    st_ = nk.AdamState.for_params([p], lr=0.1)
    nk.adam_step([p], [g], st_)
    # after one step with bias correction the update is lr * sign(g)
    np.testing.assert_allclose(p, [0.9, -1.9], atol=1e-7)
    nk.adam_step([p], [g], st_)
    np.testing.assert_allclose(p, [0.8, -1.8], atol=1e-7)
    assert st_.step == 2


def test_adam_minimises_a_quadratic():
    p = np.array([3.0, -4.0])
    st_ = nk.AdamState.for_params([p], lr=0.05)
    for _ in range(2000):
        nk.adam_step([p], [2 * p], st_)
    assert np.abs(p).max() < 1e-2


def test_adam_rejects_nonfinite_gradients():
    p = np.zeros(2)
    with pytest.raises(NumericError):
        nk.adam_step([p], [np.array([np.nan, 0.0])], nk.AdamState.for_params([p]))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_softmax_property(rows, cols, seed):
    x = np.random.default_rng(seed).standard_normal((rows, cols)) * 10
    s = nk.row_softmax(x).data
    assert np.all(s >= 0)
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
