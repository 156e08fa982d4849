import numpy as np
import pytest

from deepclass import tensor_ops as T


def conv_params(kernel, bias=None, stride=1, padding=0):
    kernel = np.asarray(kernel, dtype=np.float32)
    if bias is None:
        bias = np.zeros(kernel.shape[0], dtype=np.float32)
    return T.ConvParams(kernel, np.asarray(bias, dtype=np.float32), stride, padding)


class TestConv2d:
    def test_zero_input_zero_output(self):
        x = np.zeros((1, 1, 3, 3), dtype=np.float32)
        p = conv_params(np.random.rand(2, 1, 2, 2))
        assert np.all(T.conv2d(x, p) == 0)

    def test_identity_kernel(self):
        x = np.random.rand(1, 1, 3, 3).astype(np.float32)
        p = conv_params(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(T.conv2d(x, p), x)

    def test_hand_computed_window_sums(self):
        x = np.arange(1, 10, dtype=np.float32).reshape(1, 1, 3, 3)
        p = conv_params(np.ones((1, 1, 2, 2)))
        np.testing.assert_array_equal(
            T.conv2d(x, p)[0, 0], [[12, 16], [24, 28]])

    def test_channel_mismatch_raises(self):
        x = np.zeros((1, 2, 3, 3), dtype=np.float32)
        p = conv_params(np.ones((1, 1, 2, 2)))
        with pytest.raises(T.DimensionError):
            T.conv2d(x, p)

    def test_empty_output_geometry_raises(self):
        x = np.zeros((1, 1, 2, 2), dtype=np.float32)
        p = conv_params(np.ones((1, 1, 3, 3)))
        with pytest.raises(T.GeometryError):
            T.conv2d(x, p)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        x = rng.random((2, 3, 6, 6), dtype=np.float32)
        p = conv_params(rng.random((4, 3, 3, 3)), stride=1, padding=1)
        a, b = T.conv2d(x, p), T.conv2d(x, p)
        assert a.tobytes() == b.tobytes()


def conv2d_oracle(x, p):
    """Naive nested-loop cross-correlation."""
    b, in_c, h, w = x.shape
    out_c, _, kh, kw = p.kernel.shape
    oh = T.conv_out_extent(h, kh, p.stride, p.padding)
    ow = T.conv_out_extent(w, kw, p.stride, p.padding)
    out = np.zeros((b, out_c, oh, ow), dtype=np.float64)
    for bi in range(b):
        for o in range(out_c):
            for y in range(oh):
                for xo in range(ow):
                    acc = float(p.bias[o])
                    for c in range(in_c):
                        for i in range(kh):
                            for j in range(kw):
                                yy = y * p.stride + i - p.padding
                                xx = xo * p.stride + j - p.padding
                                if 0 <= yy < h and 0 <= xx < w:
                                    acc += float(x[bi, c, yy, xx]) * float(p.kernel[o, c, i, j])
                    out[bi, o, y, xo] = acc
    return out.astype(np.float32)


def maxpool_oracle(x, p):
    """Explicit window scan with first-occurrence tie-break."""
    b, c, h, w = x.shape
    oh = (h - p.window) // p.stride + 1
    ow = (w - p.window) // p.stride + 1
    out = np.zeros((b, c, oh, ow), dtype=x.dtype)
    arg = np.zeros((b, c, oh, ow), dtype=np.int64)
    for bi in range(b):
        for ci in range(c):
            for y in range(oh):
                for xo in range(ow):
                    best, best_idx = None, None
                    for i in range(p.window):
                        for j in range(p.window):
                            yy, xx = y * p.stride + i, xo * p.stride + j
                            v = x[bi, ci, yy, xx]
                            if best is None or v > best:
                                best, best_idx = v, yy * w + xx
                    out[bi, ci, y, xo] = best
                    arg[bi, ci, y, xo] = best_idx
    return out, arg


def small_conv_grid():
    for b in (1, 2):
        for c in (1, 3):
            for hw in (3, 5, 7):
                for k in (1, 2, 3):
                    for stride in (1, 2):
                        for pad in (0, 1):
                            if T.conv_out_extent(hw, k, stride, pad) >= 1:
                                yield b, c, hw, k, stride, pad


def test_conv2d_matches_oracle_on_shape_grid():
    rng = np.random.default_rng(7)
    for b, c, hw, k, stride, pad in small_conv_grid():
        x = rng.standard_normal((b, c, hw, hw)).astype(np.float32)
        p = conv_params(rng.standard_normal((2, c, k, k)),
                        rng.standard_normal(2), stride, pad)
        np.testing.assert_allclose(T.conv2d(x, p), conv2d_oracle(x, p), atol=1e-5)


def test_maxpool2d_matches_oracle_on_shape_grid():
    rng = np.random.default_rng(8)
    for b in (1, 2):
        for c in (1, 3):
            for hw in (3, 5, 7):
                for window in (1, 2, 3):
                    for stride in (1, 2):
                        if window > hw:
                            continue
                        x = rng.standard_normal((b, c, hw, hw)).astype(np.float32)
                        p = T.PoolParams(window, stride)
                        out, arg = T.maxpool2d(x, p)
                        exp_out, exp_arg = maxpool_oracle(x, p)
                        np.testing.assert_array_equal(out, exp_out)
                        np.testing.assert_array_equal(arg, exp_arg)


class TestMaxpool:
    def test_simple_window(self):
        x = np.array([[[[1., 2.], [3., 4.]]]])
        out, arg = T.maxpool2d(x, T.PoolParams(2, 2))
        assert out[0, 0, 0, 0] == 4
        assert arg[0, 0, 0, 0] == 3

    def test_tie_breaks_to_lowest_flat_index(self):
        x = np.full((1, 1, 2, 2), 5.0)
        out, arg = T.maxpool2d(x, T.PoolParams(2, 2))
        assert out[0, 0, 0, 0] == 5
        assert arg[0, 0, 0, 0] == 0

    def test_constant_input_first_index_per_window(self):
        x = np.ones((1, 1, 4, 4), dtype=np.float32)
        out, arg = T.maxpool2d(x, T.PoolParams(2, 2))
        np.testing.assert_array_equal(arg[0, 0], [[0, 2], [8, 10]])

    def test_window_too_large_raises(self):
        with pytest.raises(T.GeometryError):
            T.maxpool2d(np.zeros((1, 1, 2, 2)), T.PoolParams(3, 1))

    def test_grad_zero_dout(self):
        x = np.random.rand(1, 1, 4, 4).astype(np.float32)
        out, arg = T.maxpool2d(x, T.PoolParams(2, 2))
        d = T.maxpool2d_grad(arg, np.zeros_like(out), x.shape)
        assert np.all(d == 0)

    def test_grad_routes_to_winner(self):
        x = np.array([[[[1., 2.], [3., 4.]]]])
        out, arg = T.maxpool2d(x, T.PoolParams(2, 2))
        d = T.maxpool2d_grad(arg, np.ones_like(out), x.shape)
        np.testing.assert_array_equal(d[0, 0], [[0, 0], [0, 1]])

    def test_grad_accumulates_on_overlap(self):
        # single global max wins every overlapping window
        x = np.zeros((1, 1, 3, 3), dtype=np.float32)
        x[0, 0, 1, 1] = 9.0
        out, arg = T.maxpool2d(x, T.PoolParams(2, 1))
        d = T.maxpool2d_grad(arg, np.ones_like(out), x.shape)
        assert d[0, 0, 1, 1] == 4.0


class TestConvGrad:
    def test_zero_dout_zero_grads(self):
        x = np.random.rand(1, 1, 3, 3).astype(np.float32)
        p = conv_params(np.random.rand(1, 1, 2, 2))
        d_x, d_k, d_b = T.conv2d_grad(x, p, np.zeros((1, 1, 2, 2), np.float32))
        assert np.all(d_x == 0) and np.all(d_k == 0) and np.all(d_b == 0)

    def test_identity_kernel_closed_form(self):
        x = np.random.rand(1, 1, 3, 3).astype(np.float32)
        p = conv_params(np.ones((1, 1, 1, 1)))
        d_out = np.ones((1, 1, 3, 3), dtype=np.float32)
        d_x, d_k, d_b = T.conv2d_grad(x, p, d_out)
        np.testing.assert_array_equal(d_x, np.ones_like(x))
        np.testing.assert_allclose(d_k[0, 0, 0, 0], x.sum(), rtol=1e-6)
        assert d_b[0] == 9

    def test_dout_shape_mismatch_raises(self):
        x = np.zeros((1, 1, 3, 3), dtype=np.float32)
        p = conv_params(np.ones((1, 1, 2, 2)))
        with pytest.raises(T.DimensionError):
            T.conv2d_grad(x, p, np.zeros((1, 1, 3, 3), np.float32))


class TestRelu:
    def test_examples(self):
        np.testing.assert_array_equal(
            T.relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_positive_identity(self):
        x = np.random.rand(5).astype(np.float32) + 0.1
        np.testing.assert_array_equal(T.relu(x), x)

    def test_grad_zero_at_zero(self):
        d = T.relu_grad(np.array([0.0, -1.0, 3.0]), np.array([7.0, 7.0, 7.0]))
        np.testing.assert_array_equal(d, [0.0, 0.0, 7.0])


class TestDense:
    def test_identity_weight(self):
        x = np.random.rand(2, 3).astype(np.float32)
        out = T.dense(x, np.eye(3, dtype=np.float32), np.zeros(3, np.float32))
        np.testing.assert_array_equal(out, x)

    def test_zero_input_gives_bias(self):
        bias = np.array([1.0, 2.0], dtype=np.float32)
        out = T.dense(np.zeros((3, 4), np.float32),
                      np.random.rand(2, 4).astype(np.float32), bias)
        np.testing.assert_array_equal(out, np.tile(bias, (3, 1)))

    def test_inner_extent_mismatch_raises(self):
        with pytest.raises(T.DimensionError):
            T.dense(np.zeros((1, 3)), np.zeros((2, 4)), np.zeros(2))


class TestSoftmaxXent:
    def test_uniform_logits_loss_ln7(self):
        logits = np.zeros((3, 7), dtype=np.float32)
        target = np.eye(7, dtype=np.float32)[[0, 3, 6]]
        loss, probs, _ = T.softmax_xent(logits, target)
        assert loss == pytest.approx(np.log(7.0), abs=1e-6)

    def test_huge_target_logit_stable(self):
        logits = np.zeros((1, 7), dtype=np.float32)
        logits[0, 2] = 1000.0
        target = np.eye(7, dtype=np.float32)[[2]]
        loss, probs, d = T.softmax_xent(logits, target)
        assert loss < 1e-6
        assert np.all(np.isfinite(probs))

    def test_dlogits_rows_sum_to_zero(self):
        rng = np.random.default_rng(3)
        logits = rng.standard_normal((4, 7)).astype(np.float32)
        target = np.eye(7, dtype=np.float32)[rng.integers(0, 7, 4)]
        _, probs, d = T.softmax_xent(logits, target)
        np.testing.assert_allclose(d.sum(axis=1), 0, atol=1e-6)
        np.testing.assert_allclose(probs.sum(axis=1), 1, atol=1e-6)
        assert np.all(probs > 0) and np.all(probs < 1)

    def test_malformed_onehot_rejected(self):
        logits = np.zeros((1, 7), dtype=np.float32)
        bad = np.zeros((1, 7), dtype=np.float32)
        bad[0, 0] = bad[0, 1] = 1.0
        with pytest.raises(ValueError):
            T.softmax_xent(logits, bad)
