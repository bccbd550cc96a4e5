import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from nca3d import tensor as T
from nca3d.tensor import DimensionError, Tensor


def _t(a, grad=True):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


def test_rejects_six_dims():
    with pytest.raises(DimensionError):
        Tensor(np.zeros((1,) * 6))


def test_integer_input_becomes_float32():
    assert Tensor([1, 2, 3]).dtype == np.float32


def test_broadcast_rules():
    a = _t(np.ones((2, 3, 4, 4, 4)))
    m = np.ones((2, 1, 4, 4, 4))
    assert (a * m).shape == a.shape
    assert (1.0 - a).shape == a.shape
    with pytest.raises(DimensionError):
        a + np.ones((3, 4, 4, 4))  # rank mismatch is not broadcast
    with pytest.raises(DimensionError):
        a + np.ones((2, 2, 4, 4, 4))


def test_pointwise_gradients():
    x = _t([[-1.0, 0.5], [2.0, -3.0]])
    y = _t([[2.0, -1.0], [0.5, 4.0]])
    out = T.reduce("sum", x * y + x / y - T.relu(x) + T.exp(x))
    T.backward(out)
    xv, yv = x.data, y.data
    np.testing.assert_allclose(x.grad, yv + 1 / yv - (xv > 0) + np.exp(xv))
    np.testing.assert_allclose(y.grad, xv - xv / yv**2)


def test_relu_gradient_is_zero_at_zero():
    x = _t([0.0, 1.0])
    T.backward(T.reduce("sum", T.relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_clip_passes_gradient_inside_only():
    x = _t([-7.0, -1.0, 3.0, 9.0])
    T.backward(T.reduce("sum", T.clip(x, -5, 5) * np.array([1.0, 2.0, 3.0, 4.0])))
    np.testing.assert_array_equal(x.grad, [0.0, 2.0, 3.0, 0.0])


def test_backward_accumulates_on_leaves():
    x = _t([1.0, 2.0])
    T.backward(T.reduce("sum", x * x))
    T.backward(T.reduce("sum", x * x))
    np.testing.assert_allclose(x.grad, 4 * x.data)


def test_shared_subexpression_gets_both_paths():
    x = _t(3.0)
    y = x * x
    T.backward(y * y)  # x^4
    assert x.grad == pytest.approx(4 * 27.0)


def test_backward_requires_scalar():
    with pytest.raises(DimensionError):
        T.backward(_t([1.0, 2.0]) * 2.0)


def test_no_grad_builds_no_graph():
    x = _t([1.0])
    with T.no_grad():
        y = x * 2.0
    assert y.is_leaf and not y.requires_grad


def test_reduce_axes_and_empty():
    a = _t(np.arange(24.0).reshape(2, 3, 4))
    assert T.reduce("sum", a, axis=(1, 2)).shape == (2,)
    assert T.reduce("mean", a, axis=-1, keepdims=True).shape == (2, 3, 1)
    with pytest.raises(DimensionError):
        T.reduce("sum", _t(np.zeros((0, 3))))


def test_log_softmax_matches_direct_formula():
    x = np.random.default_rng(0).normal(size=(2, 4, 3, 3, 3)) * 5
    out = T.log_softmax_channels(_t(x, grad=False)).data
    ref = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_log_softmax_is_stable_for_huge_logits():
    x = np.zeros((3, 1, 1, 1))
    x[0] = 1e4
    out = T.log_softmax_channels(_t(x, grad=False)).data
    assert np.all(np.isfinite(out))


@pytest.mark.parametrize("k,pad", [(1, 0), (3, 0), (3, 1)])
def test_conv3d_matches_reference_single_example(k, pad):
    rng = np.random.default_rng(k + pad)
    x = rng.normal(size=(3, 5, 4, 6))
    w = rng.normal(size=(2, 3, k, k, k))
    b = rng.normal(size=2)
    fast = T.conv3d(_t(x, False), _t(w, False), _t(b, False), padding=pad).data
    np.testing.assert_allclose(fast, T.conv3d_reference(x, w, b, pad), atol=1e-10)


def test_conv3d_rejects_unsupported_configs():
    x = _t(np.zeros((2, 4, 4, 4)))
    with pytest.raises(DimensionError):
        T.conv3d(x, _t(np.zeros((1, 3, 3, 3, 3))))  # channel mismatch
    with pytest.raises(ValueError):
        T.conv3d(x, _t(np.zeros((1, 2, 5, 5, 5))))  # kernel size
    with pytest.raises(ValueError):
        T.conv3d(x, _t(np.zeros((1, 2, 3, 3, 3))), stride=2)


@pytest.mark.parametrize("pad", [0, 1])
def test_conv3d_gradients_finite_difference(pad):
    rng = np.random.default_rng(7)
    x0 = rng.normal(size=(2, 2, 3, 4, 3))
    w0 = rng.normal(size=(3, 2, 3, 3, 3))
    b0 = rng.normal(size=3)
    probe = rng.normal(size=(2, 3) + ((3, 4, 3) if pad else (1, 2, 1)))

    def f_x(x):
        return T.reduce("sum", T.conv3d(x, _t(w0, False), _t(b0, False), padding=pad) * probe)

    def f_w(w):
        return T.reduce("sum", T.conv3d(_t(x0, False), w, _t(b0, False), padding=pad) * probe)

    def f_b(b):
        return T.reduce("sum", T.conv3d(_t(x0, False), _t(w0, False), b, padding=pad) * probe)

    for f, v in ((f_x, x0), (f_w, w0), (f_b, b0)):
        assert T.finite_diff_check(f, _t(v), eps=1e-5) < 1e-6


def test_maxpool_window_treats_outside_as_zero():
    x = -np.ones((1, 3, 3, 3))
    out = T.maxpool3d_window(x).data[0]
    assert out[1, 1, 1] == -1  # the only cell with no outside neighbours
    assert np.count_nonzero(out == 0) == 26
    x = np.zeros((1, 5, 5, 5))
    x[0, 0, 0, 0] = 2.0
    out = T.maxpool3d_window(x).data[0]
    assert np.count_nonzero(out) == 8  # corner cell reaches a 2x2x2 block


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)),
                  elements=st.floats(-5, 5)))
def test_maxpool_matches_brute_force(a):
    out = T.maxpool3d_window(a[None]).data[0]
    W, D, H = a.shape
    padded = np.zeros((W + 2, D + 2, H + 2))
    padded[:] = -np.inf
    padded[1:-1, 1:-1, 1:-1] = a
    ref = np.empty_like(a)
    for i in range(W):
        for j in range(D):
            for k in range(H):
                ref[i, j, k] = padded[i:i + 3, j:j + 3, k:k + 3].max()
    # cells outside the grid count as 0
    border = np.zeros_like(a, dtype=bool)
    border[[0, -1], :, :] = True
    border[:, [0, -1], :] = True
    border[:, :, [0, -1]] = True
    ref = np.where(border, np.maximum(ref, 0), ref)
    np.testing.assert_array_equal(out, ref)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(2, 4), st.integers(2, 4), st.integers(2, 4),
       st.sampled_from([1, 3]), st.integers(0, 2**31 - 1))
def test_conv3d_property_vs_reference(cin, cout, w, d, h, k, seed):
    rng = np.random.default_rng(seed)
    pad = (k - 1) // 2
    x = rng.normal(size=(cin, w, d, h))
    wt = rng.normal(size=(cout, cin, k, k, k))
    fast = T.conv3d(_t(x, False), _t(wt, False), padding=pad).data
    np.testing.assert_allclose(fast, T.conv3d_reference(x, wt, None, pad), atol=1e-9)
