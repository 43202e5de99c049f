import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from wavesfnet.autodiff import (
    GraphError,
    ParameterStore,
    ShapeError,
    Tensor,
    build_tensor,
    concat,
    elementwise_shape_op,
    grad_check,
    no_grad,
    split,
)
from wavesfnet.autodiff import functional as F
from wavesfnet import gradsuite


def leaf(a):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


# -- construction --------------------------------------------------------------

def test_zeros_and_full():
    assert np.array_equal(build_tensor("zeros", (2, 2)).data, [[0, 0], [0, 0]])
    t = build_tensor("full", (1,), value=3.5)
    assert t.data.tolist() == [3.5]


def test_normal_is_seed_deterministic():
    a = build_tensor("normal", (4, 5), mean=0.0, std=0.02, seed=7)
    b = build_tensor("normal", (4, 5), mean=0.0, std=0.02, seed=7)
    assert a.data.tobytes() == b.data.tobytes()
    c = build_tensor("normal", (4, 5), std=0.02, seed=8)
    assert not np.array_equal(a.data, c.data)


def test_from_values_and_dtype():
    t = build_tensor("from_values", (2, 2), "float64", values=[1, 2, 3, 4])
    assert t.dtype == np.float64 and t.data.tolist() == [[1, 2], [3, 4]]


@pytest.mark.parametrize("kwargs", [
    dict(kind="zeros", shape=()),
    dict(kind="zeros", shape=(2, 0)),
    dict(kind="normal", shape=(2,), std=-1.0),
    dict(kind="from_values", shape=(3,), values=[1, 2]),
    dict(kind="nope", shape=(1,)),
])
def test_build_tensor_rejects(kwargs):
    with pytest.raises((ShapeError, ValueError)):
        build_tensor(**kwargs)


# -- structural ops ------------------------------------------------------------

def test_add_and_mean():
    out = elementwise_shape_op("add", Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]]))
    assert out.data.tolist() == [[4, 6]]
    assert elementwise_shape_op("mean", Tensor([[1.0, 2.0], [3.0, 4.0]])).item() == 2.5


def test_split_concat_round_trip():
    x = Tensor(np.arange(2 * 6 * 3 * 3, dtype=np.float32).reshape(2, 6, 3, 3))
    parts = split(x, 2, axis=1)
    assert [p.shape for p in parts] == [(2, 3, 3, 3)] * 2
    assert concat(parts, axis=1).data.tobytes() == x.data.tobytes()
    sized = split(x, [1, 5], axis=1)
    assert [p.shape[1] for p in sized] == [1, 5]


def test_shape_errors():
    with pytest.raises(ShapeError):
        elementwise_shape_op("add", Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    with pytest.raises((ShapeError, ValueError)):
        split(Tensor(np.ones((2, 5))), [2, 2], axis=1)
    with pytest.raises((ShapeError, ValueError)):
        concat([Tensor(np.ones((2, 2)))], axis=3)


def test_permute_reshape_slice_gradients():
    rng = np.random.default_rng(0)
    x = leaf(rng.standard_normal((2, 3, 4)))
    w = Tensor(rng.standard_normal((4, 2, 3)))
    err = grad_check(lambda: (x.permute(2, 0, 1) * w).sum()
                     + x.reshape(6, 4)[1:4, ::2].sum() * 3.0, [x])
    assert err < 1e-8


# -- backward semantics --------------------------------------------------------

def test_sum_gradient_is_ones():
    x = leaf(np.arange(6.0).reshape(2, 3))
    x.sum().backward()
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_square_gradient_is_2x():
    x = leaf([[1.0, -2.0], [0.5, 3.0]])
    (x * x).sum().backward()
    assert np.allclose(x.grad, 2 * x.data)


def test_shared_input_accumulates():
    x = leaf([1.0, 2.0])
    (x * x + x).sum().backward()
    assert np.allclose(x.grad, 2 * x.data + 1)


def test_broadcast_per_channel_gradient():
    rng = np.random.default_rng(1)
    x = leaf(rng.standard_normal((2, 3, 4, 4)))
    b = leaf(rng.standard_normal((1, 3, 1, 1)))
    p = Tensor(rng.standard_normal((2, 3, 4, 4)))
    assert grad_check(lambda: ((x + b) * b * p).sum(), [x, b]) < 1e-6


def test_second_backward_raises():
    x = leaf([1.0, 2.0])
    y = (x * x).sum()
    y.backward()
    with pytest.raises(GraphError):
        y.backward()


def test_no_grad_records_nothing():
    x = leaf([1.0, 2.0])
    with no_grad():
        y = (x * x).sum()
    assert not y.requires_grad
    with pytest.raises(GraphError):
        y.backward()


def test_graph_is_topologically_ordered():
    x = leaf([1.0])
    a = x * 2.0
    b = a + x
    c = b * a
    assert a.node_id < b.node_id < c.node_id


# -- functional ops ------------------------------------------------------------

def naive_conv(x, w, b=None, groups=1):
    B, Cin, H, W = x.shape
    Cout, cpg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    out = np.zeros((B, Cout, H, W))
    opg = Cout // groups
    for n in range(B):
        for o in range(Cout):
            g = o // opg
            for i in range(H):
                for j in range(W):
                    patch = xp[n, g * cpg:(g + 1) * cpg, i:i + kh, j:j + kw]
                    out[n, o, i, j] = np.sum(patch * w[o]) + (0 if b is None else b[o])
    return out


def test_conv_identity_kernel():
    x = Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    out = F.conv2d(x, Tensor(np.ones((1, 1, 1, 1))))
    assert out.data.tolist() == [[[[1, 2], [3, 4]]]]


def test_conv_all_ones_center_is_nine():
    out = F.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))))
    assert out.data[0, 0, 1, 1] == 9
    assert out.data[0, 0, 0, 0] == 4


def test_depthwise_channel_independence():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 4, 5, 5))
    x[:, 2] = 0
    out = F.conv2d(Tensor(x), Tensor(rng.standard_normal((4, 1, 3, 3))), groups=4)
    assert np.all(out.data[:, 2] == 0)


@pytest.mark.parametrize("groups,cin,cout,k", [(1, 3, 2, 3), (3, 3, 3, 5), (2, 4, 6, 3), (1, 2, 4, 1)])
def test_conv_matches_nested_loops(groups, cin, cout, k):
    rng = np.random.default_rng(groups + k)
    x = rng.standard_normal((2, cin, 5, 6))
    w = rng.standard_normal((cout, cin // groups, k, k))
    b = rng.standard_normal(cout)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), groups=groups)
    assert np.allclose(out.data, naive_conv(x, w, b, groups), atol=1e-12)


def test_conv_errors():
    x = Tensor(np.ones((1, 3, 4, 4)))
    with pytest.raises((ShapeError, ValueError)):
        F.conv2d(x, Tensor(np.ones((2, 2, 3, 3))), groups=2)
    with pytest.raises((ShapeError, ValueError)):
        F.conv2d(x, Tensor(np.ones((3, 3, 2, 2))))


def test_activation_values():
    x = Tensor(np.array([0.0, 1.0]))
    assert F.silu(x).data[0] == 0.0
    assert F.sigmoid(x).data[0] == 0.5
    assert F.silu(x).data[1] == pytest.approx(0.7310585786300049, abs=1e-12)
    assert F.gelu(Tensor(np.zeros(3))).data.tolist() == [0, 0, 0]


def test_activation_rejects_nonfinite():
    with pytest.raises(ValueError):
        F.activation(Tensor(np.array([np.nan])), "silu")
    with pytest.raises(ValueError):
        F.activation(Tensor(np.array([1.0])), "relu6")


def test_global_pool_values():
    c = Tensor(np.full((1, 1, 3, 3), 5.0))
    assert F.global_pool(c, "avg").item() == 5 and F.global_pool(c, "max").item() == 5
    x = Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    assert F.global_pool(x, "avg").item() == 2.5 and F.global_pool(x, "max").item() == 4
    n = Tensor(np.array([[[[-3.0, -1.0], [-2.0, -4.0]]]]))
    assert F.global_pool(n, "max").item() == -1


def test_fft_round_trip_float32():
    rng = np.random.default_rng(3)
    for w in (8, 9):
        x = rng.standard_normal((2, 3, 6, w)).astype(np.float32)
        back = F.irfft2(F.rfft2(Tensor(x)), w)
        assert np.max(np.abs(back.data - x)) <= 1e-5


def test_fft_constant_dc_bin():
    spec = F.rfft2(Tensor(np.full((4, 6), 2.5))).data
    assert spec[0, 0, 0] == 2.5 * 24 and spec[0, 0, 1] == 0
    spec[0, 0] = 0
    assert np.all(spec == 0)


def test_fft_parseval_against_naive_dft():
    rng = np.random.default_rng(4)
    H, W = 5, 6
    x = rng.standard_normal((H, W))
    m = np.arange(H)[:, None] * np.arange(H)[None, :]
    n = np.arange(W)[:, None] * np.arange(W)[None, :]
    full = np.exp(-2j * np.pi * m / H) @ x @ np.exp(-2j * np.pi * n / W)
    half = F.rfft2(Tensor(x)).data
    assert np.allclose(half[..., 0] + 1j * half[..., 1], full[:, :W // 2 + 1], atol=1e-10)
    assert np.sum(x ** 2) == pytest.approx(np.sum(np.abs(full) ** 2) / (H * W), rel=1e-12)


def test_irfft2_width_mismatch():
    with pytest.raises(ShapeError):
        F.irfft2(Tensor(np.zeros((4, 4, 2))), 9)


def test_drop_path_identity_cases():
    x = Tensor(np.random.default_rng(5).standard_normal((4, 3, 2, 2)))
    assert F.drop_path(x, 0.0, True, np.random.default_rng(0)) is x
    assert F.drop_path(x, 0.5, False) is x
    out = F.drop_path(x, 0.5, True, np.random.default_rng(0)).data
    for b in range(4):
        assert np.allclose(out[b], 0) or np.allclose(out[b], 2 * x.data[b])


# -- gradient checker ----------------------------------------------------------

def test_gradcheck_linear_is_exact():
    x = leaf([0.25, 0.5, 0.75])
    assert grad_check(lambda: (x * 2.0 + 1.0).sum(), [x], eps=1e-5) <= 1e-10


def test_gradcheck_silu_at_one():
    x = leaf([1.0])
    s = expit(1.0)
    assert grad_check(lambda: F.silu(x).sum(), [x]) <= 1e-6
    y = leaf([1.0])
    F.silu(y).sum().backward()
    assert y.grad[0] == pytest.approx(s + s * (1 - s), rel=1e-14)


def test_gradcheck_detects_corruption():
    rng = np.random.default_rng(7)
    x = leaf(rng.standard_normal((3, 3)))

    def fn():
        return F.silu(x).sum()

    fn().backward()
    doubled = 2 * x.grad.copy()
    assert grad_check(fn, {"x": x}, analytic={"x": doubled}) >= 0.4


def test_silu_conv_gradient():
    assert gradsuite.check_silu_conv() <= 1e-4


@pytest.mark.parametrize("name", ["conv2d", "activations", "global_pool", "rfft2_irfft2",
                                  "spectral_filter", "wavelet"])
def test_op_suites(name):
    assert gradsuite.SUITES[name]() <= gradsuite.TOLERANCE


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(2, 7), st.integers(2, 7), st.integers(0, 2**31))
def test_conv_linearity(b, c, h, w, seed):
    rng = np.random.default_rng(seed)
    x1, x2 = rng.standard_normal((2, b, c, h, w))
    wt = Tensor(rng.standard_normal((c, 1, 3, 3)))
    lhs = F.conv2d(Tensor(x1 + 2 * x2), wt, groups=c).data
    rhs = F.conv2d(Tensor(x1), wt, groups=c).data + 2 * F.conv2d(Tensor(x2), wt, groups=c).data
    assert np.allclose(lhs, rhs, atol=1e-10)


# -- parameter store -----------------------------------------------------------

def test_parameter_store():
    store = ParameterStore(dtype=np.float64, seed=1)
    store.normal("a.w", (2, 3), std=0.1)
    store.add("a.psi", np.ones((2, 2, 2)), complex_valued=True)
    with pytest.raises(KeyError):
        store.zeros("a.w", (1,))
    assert store.count() == 6 + 8
    assert store.complex_count() == 8
    assert store.grad("a.w").shape == (2, 3)
    state = store.state_dict()
    store["a.w"].data[...] = 0
    store.load_state_dict(state)
    assert np.array_equal(store["a.w"].data, state["a.w"])
    with pytest.raises((ShapeError, ValueError, KeyError)):
        store.load_state_dict({"a.w": np.zeros((3, 2)), "a.psi": np.ones((2, 2, 2))})
