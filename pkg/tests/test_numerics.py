import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bta.errors import ConfigError, DimensionError, NumericError
from bta.numerics import (AdamState, EmptyMaskWarning, ParameterStore, adam_step, batch_norm,
                          batch_norm_backward, cross_entropy, cross_entropy_grad, dense, dense_backward,
                          finite_diff_check, gelu, gelu_backward, linear, linear_backward, masked_mse,
                          multihead_attention, multihead_attention_backward, relative_error, softmax,
                          softmax_backward)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


# -- linear ---------------------------------------------------------------


def test_linear_identity():
    X = np.random.default_rng(0).normal(size=(3, 5))
    np.testing.assert_array_equal(linear(X, np.eye(3), np.zeros((3, 5))), X)


def test_linear_projection_shape():
    H, N, E = 16, 128, 8
    out = linear(np.zeros((N, E)), np.zeros((H, N)), np.zeros((H, E)))
    assert out.shape == (H, E)


def test_linear_matches_triple_loop():
    rng = np.random.default_rng(1)
    W, X, B = rng.normal(size=(3, 2)), rng.normal(size=(2, 4)), rng.normal(size=(3, 4))
    expected = np.zeros((3, 4))
    for i in range(3):
        for j in range(4):
            expected[i, j] = B[i, j] + sum(W[i, k] * X[k, j] for k in range(2))
    np.testing.assert_allclose(linear(X, W, B), expected, rtol=0, atol=1e-14)


def test_linear_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(3, 2\).*\(4, 4\)"):
        linear(np.zeros((4, 4)), np.zeros((3, 2)), np.zeros((3, 4)))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (3, 4), elements=finite),
       finite, finite)
def test_linear_is_linear(X1, X2, a, b):
    W = np.random.default_rng(2).normal(size=(2, 3))
    B = np.zeros((2, 4))
    lhs = linear(a * X1 + b * X2, W, B)
    rhs = a * linear(X1, W, B) + b * linear(X2, W, B)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


def _grad_ok(loss_fn, store, tol=1e-6):
    report = finite_diff_check(loss_fn, store, tolerance=tol)
    assert report.passed, report.per_parameter


def test_linear_gradients():
    rng = np.random.default_rng(3)
    st_ = ParameterStore()
    st_.add("X", rng.normal(size=(3, 4)))
    st_.add("W", rng.normal(size=(2, 3)))
    st_.add("B", rng.normal(size=(2, 1)))
    C = rng.normal(size=(2, 4))

    def loss(s):
        s.zero_grad()
        out = linear(s["X"], s["W"], s["B"])
        dX, dW, dB = linear_backward(C, s["X"], s["W"], s["B"].shape)
        s.accumulate("X", dX)
        s.accumulate("W", dW)
        s.accumulate("B", dB)
        return float(np.sum(C * out))

    _grad_ok(loss, st_)


def test_dense_gradients():
    rng = np.random.default_rng(4)
    st_ = ParameterStore()
    st_.add("X", rng.normal(size=(5, 3)))
    st_.add("W", rng.normal(size=(3, 2)))
    st_.add("b", rng.normal(size=2))
    C = rng.normal(size=(5, 2))

    def loss(s):
        s.zero_grad()
        dX, dW, db = dense_backward(C, s["X"], s["W"])
        s.accumulate("X", dX)
        s.accumulate("W", dW)
        s.accumulate("b", db)
        return float(np.sum(C * dense(s["X"], s["W"], s["b"])))

    _grad_ok(loss, st_)


# -- activations and losses --------------------------------------------------


def test_gelu_matches_high_precision_erf():
    xs = np.linspace(-5, 5, 11)
    mpmath.mp.dps = 40
    expected = [float(mpmath.mpf(x) * (1 + mpmath.erf(mpmath.mpf(x) / mpmath.sqrt(2))) / 2) for x in xs]
    np.testing.assert_allclose(gelu(xs), expected, rtol=0, atol=1e-6)


def test_gelu_softmax_gradients():
    rng = np.random.default_rng(5)
    st_ = ParameterStore()
    st_.add("x", rng.normal(size=(4, 3)))
    C = rng.normal(size=(4, 3))

    def loss(s):
        s.zero_grad()
        g = gelu(s["x"])
        y = softmax(g)
        s.accumulate("x", gelu_backward(softmax_backward(C, y), s["x"]))
        return float(np.sum(C * y))

    _grad_ok(loss, st_)


def test_softmax_rows_sum_to_one():
    p = softmax(np.random.default_rng(6).normal(size=(7, 5)) * 30)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 6, elements=finite), st.floats(-100, 100))
def test_softmax_shift_invariant(v, c):
    np.testing.assert_allclose(softmax(v), softmax(v + c), rtol=0, atol=1e-12)


def test_cross_entropy_values():
    assert cross_entropy(0.5, 1.0) == pytest.approx(math.log(2))
    assert cross_entropy(1.0, 1.0) == pytest.approx(0.0, abs=1e-11)
    assert cross_entropy(0.0, 0.0) == pytest.approx(0.0, abs=1e-11)
    assert np.isfinite(cross_entropy(0.0, 1.0))


def test_cross_entropy_gradient_soft_labels():
    p, y, h = 0.3, 0.7, 1e-6
    numeric = (cross_entropy(p + h, y) - cross_entropy(p - h, y)) / (2 * h)
    assert cross_entropy_grad(p, y) == pytest.approx(numeric, rel=1e-6)


# -- masked reconstruction loss ------------------------------------------------


def test_masked_mse_identical_is_zero():
    X = np.arange(6.0).reshape(2, 3)
    loss, grad = masked_mse(X, X, np.zeros_like(X))
    assert loss == 0.0 and not grad.any()


def test_masked_mse_all_visible_warns():
    X = np.ones((2, 2))
    with pytest.warns(EmptyMaskWarning):
        loss, grad = masked_mse(X + 5, X, np.ones((2, 2)))
    assert loss == 0.0 and not grad.any()


def test_masked_mse_two_by_two():
    X = np.zeros((2, 2))
    Xr = np.array([[3.0, 7.0], [7.0, 7.0]])
    mask = np.array([[0, 1], [1, 1]])
    loss, _ = masked_mse(Xr, X, mask)
    # only cell (0, 0) is hidden: (3 - 0)^2
    assert loss == 9.0


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.int8, (3, 4), elements=st.integers(0, 1)))
def test_masked_mse_visible_gradient_is_zero(Xr, mask):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyMaskWarning)
        _, grad = masked_mse(Xr, np.zeros((3, 4)), mask)
    assert np.all(grad[mask == 1] == 0.0)


# -- attention -----------------------------------------------------------------


def _attn_weights(rng, H):
    return [rng.normal(size=(H, H)) * 0.5 for _ in range(4)]


def test_attention_single_row_is_value_path():
    rng = np.random.default_rng(7)
    Wq, Wk, Wv, Wo = _attn_weights(rng, 8)
    z = rng.normal(size=(1, 8))
    out, A, _ = multihead_attention(z, Wq, Wk, Wv, Wo, heads=4)
    np.testing.assert_allclose(A, 1.0)
    np.testing.assert_allclose(out, z @ Wv @ Wo, atol=1e-12)


def test_attention_scalar_oracle():
    Z = np.array([[1.0, 0.5], [-0.5, 2.0]])
    Wq = np.array([[0.2, -0.1], [0.3, 0.4]])
    Wk = np.array([[0.5, 0.1], [-0.2, 0.3]])
    Wv = np.array([[1.0, 0.0], [0.5, -1.0]])
    Wo = np.array([[0.3, 0.7], [-0.4, 0.2]])
    out, A, _ = multihead_attention(Z, Wq, Wk, Wv, Wo, heads=1)

    def row(M, i):
        return [sum(Z[i, k] * M[k, j] for k in range(2)) for j in range(2)]

    q = [row(Wq, i) for i in range(2)]
    k = [row(Wk, i) for i in range(2)]
    v = [row(Wv, i) for i in range(2)]
    expected = []
    for i in range(2):
        s = [(q[i][0] * k[j][0] + q[i][1] * k[j][1]) / math.sqrt(2) for j in range(2)]
        e = [math.exp(x) for x in s]
        w = [x / sum(e) for x in e]
        assert A[0, i].tolist() == pytest.approx(w, abs=1e-14)
        h = [w[0] * v[0][c] + w[1] * v[1][c] for c in range(2)]
        expected.append([h[0] * Wo[0, c] + h[1] * Wo[1, c] for c in range(2)])
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_attention_eight_heads_shape():
    rng = np.random.default_rng(8)
    _, A, _ = multihead_attention(rng.normal(size=(3, 5, 16)), *_attn_weights(rng, 16), heads=8)
    assert A.shape == (3, 8, 5, 5)


def test_attention_heads_must_divide_hidden():
    rng = np.random.default_rng(9)
    with pytest.raises(ConfigError):
        multihead_attention(rng.normal(size=(4, 6)), *_attn_weights(rng, 6), heads=4)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 5, 8), elements=finite), st.sampled_from([1, 2, 4, 8]))
def test_attention_rows_are_distributions(Z, heads):
    _, A, _ = multihead_attention(Z, *_attn_weights(np.random.default_rng(10), 8), heads=heads)
    assert np.all(A >= 0)
    np.testing.assert_allclose(A.sum(axis=-1), 1.0, atol=1e-6)


def test_attention_gradients():
    rng = np.random.default_rng(11)
    st_ = ParameterStore()
    st_.add("Z", rng.normal(size=(3, 4, 8)))
    for n, W in zip("qkvo", _attn_weights(rng, 8)):
        st_.add(n, W)
    C = rng.normal(size=(3, 4, 8))

    def loss(s):
        s.zero_grad()
        out, _, cache = multihead_attention(s["Z"], s["q"], s["k"], s["v"], s["o"], heads=2)
        grads = multihead_attention_backward(C, cache, s["q"], s["k"], s["v"], s["o"])
        for n, g in zip(("Z", "q", "k", "v", "o"), grads):
            s.accumulate(n, g)
        return float(np.sum(C * out))

    _grad_ok(loss, st_)


# -- batch normalization ---------------------------------------------------------


def _bn(Z, training=True):
    shape = Z.shape[1:]
    return batch_norm(Z, np.ones(shape), np.zeros(shape), np.zeros(shape), np.ones(shape), training)


def test_batch_norm_identical_batch_gives_zero():
    Z = np.stack([np.arange(6.0).reshape(2, 3)] * 2)
    out, _, _ = _bn(Z)
    np.testing.assert_array_equal(out, 0.0)


def test_batch_norm_symmetric_pair():
    out, _, _ = _bn(np.array([[[-1.0]], [[1.0]]]))
    np.testing.assert_allclose(out.ravel(), [-1.0, 1.0], atol=1e-5)


def test_batch_norm_statistics_oracle():
    Z = np.random.default_rng(12).normal(3.0, 2.0, size=(8, 4, 5))
    out, cache, _ = _bn(Z)
    for i in range(4):
        for j in range(5):
            col = Z[:, i, j]
            m = sum(col) / len(col)
            v = sum((c - m) ** 2 for c in col) / len(col)
            assert abs(cache.xhat[:, i, j].mean()) < 1e-6
            assert abs(cache.xhat[:, i, j].var() - v / (v + 1e-5)) < 1e-12
            assert abs(cache.xhat[:, i, j].var() - 1.0) < 1e-4
            np.testing.assert_allclose(cache.xhat[:, i, j], (col - m) / math.sqrt(v + 1e-5), atol=1e-12)


def test_batch_norm_running_stats_and_eval_mode():
    Z = np.random.default_rng(13).normal(size=(6, 2, 3))
    _, _, (rm, rv) = _bn(Z)
    np.testing.assert_allclose(rm, 0.1 * Z.mean(axis=0))
    np.testing.assert_allclose(rv, 0.9 + 0.1 * Z.var(axis=0, ddof=1))
    gamma, beta = np.full((2, 3), 2.0), np.full((2, 3), 0.5)
    out, _, (rm2, _) = batch_norm(Z, gamma, beta, rm, rv, training=False)
    np.testing.assert_allclose(out, gamma * (Z - rm) / np.sqrt(rv + 1e-5) + beta)
    assert rm2 is rm


def test_batch_norm_single_sample_training_fails():
    with pytest.raises(ConfigError):
        _bn(np.zeros((1, 2, 2)))


@pytest.mark.parametrize("training", [True, False])
def test_batch_norm_gradients(training):
    rng = np.random.default_rng(14)
    st_ = ParameterStore()
    st_.add("Z", rng.normal(size=(5, 3, 4)))
    st_.add("gamma", rng.normal(size=(3, 4)))
    st_.add("beta", rng.normal(size=(3, 4)))
    rm, rv = rng.normal(size=(3, 4)), rng.uniform(0.5, 2, size=(3, 4))
    C = rng.normal(size=(5, 3, 4))

    def loss(s):
        s.zero_grad()
        out, cache, _ = batch_norm(s["Z"], s["gamma"], s["beta"], rm, rv, training)
        for n, g in zip(("Z", "gamma", "beta"), batch_norm_backward(C, cache)):
            s.accumulate(n, g)
        return float(np.sum(C * out))

    _grad_ok(loss, st_)


# -- parameter store and Adam ------------------------------------------------------


def test_store_rejects_duplicates_and_bad_gradients():
    s = ParameterStore()
    s.add("w", np.zeros(3))
    with pytest.raises(ValueError):
        s.add("w", np.zeros(3))
    with pytest.raises(DimensionError):
        s.accumulate("w", np.zeros(4))
    assert s.grads["w"].shape == s.params["w"].shape


def test_adam_zero_gradient_is_identity():
    s = ParameterStore()
    s.add("w", np.array([1.0, -2.0]))
    state = AdamState(lr=0.1)
    for _ in range(5):
        adam_step(s, state)
    np.testing.assert_array_equal(s["w"], [1.0, -2.0])
    assert state.step == 5


def test_adam_first_step():
    s = ParameterStore()
    s.add("w", np.array([0.0, 0.0]))
    s.grads["w"][:] = [0.3, -4.0]
    adam_step(s, AdamState(lr=0.01))
    # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    expected = [-0.01 * 0.3 / (0.3 + 1e-8), 0.01 * 4.0 / (4.0 + 1e-8)]
    np.testing.assert_allclose(s["w"], expected, rtol=1e-15)


def test_adam_quadratic_converges():
    s = ParameterStore()
    s.add("w", np.array([0.0]))
    state = AdamState(lr=0.05)
    for _ in range(2000):
        s.grads["w"][:] = 2.0 * (s["w"] - 3.0)
        adam_step(s, state)
    assert abs(s["w"][0] - 3.0) < 1e-3


def test_adam_nan_gradient_names_parameter():
    s = ParameterStore()
    s.add("fusion.weight", np.zeros(2))
    s.grads["fusion.weight"][0] = np.nan
    with pytest.raises(NumericError, match="fusion.weight"):
        adam_step(s, AdamState(lr=0.1))


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, 4, elements=finite), st.floats(1e-4, 1.0))
def test_adam_zero_gradients_property(w, lr):
    s = ParameterStore()
    s.add("w", w)
    adam_step(s, AdamState(lr=lr))
    np.testing.assert_array_equal(s["w"], w)


# -- gradient check harness ----------------------------------------------------------


def test_finite_diff_constant_loss():
    s = ParameterStore()
    s.add("w", np.ones(100))

    def loss(st_):
        st_.zero_grad()
        return 4.2

    report = finite_diff_check(loss, s)
    assert report.passed and report.max_rel_error == 0.0
    assert report.n_checked == 64


def test_finite_diff_detects_wrong_gradient():
    s = ParameterStore()
    s.add("w", np.ones(3))

    def loss(st_):
        st_.zero_grad()
        st_.accumulate("w", 3.0 * st_["w"])  # true gradient is 2w
        return float(np.sum(st_["w"] ** 2))

    assert not finite_diff_check(loss, s).passed


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-9, 0.0) == pytest.approx(1e-3)
