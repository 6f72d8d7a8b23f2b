"""Tensor-op tests against naive loop oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqade.nn import (
    BatchNormParams,
    ConvParams,
    batchnorm_infer,
    concat_channels,
    conv2d,
    global_avg_pool,
    leaky_relu,
    maxpool2,
    maxpool_same,
    sigmoid,
    upsample2,
)

# ---------------------------------------------------------------- oracles


def conv2d_loops(x, kernel, bias):
    """Direct nested-loop same-padded convolution."""
    h, w, cin = x.shape
    kh, kw, _, cout = kernel.shape
    out = np.zeros((h, w, cout), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for o in range(cout):
                acc = float(bias[o])
                for dh in range(kh):
                    for dw in range(kw):
                        si, sj = i + dh - kh // 2, j + dw - kw // 2
                        if 0 <= si < h and 0 <= sj < w:
                            for c in range(cin):
                                acc += float(x[si, sj, c]) * float(kernel[dh, dw, c, o])
                out[i, j, o] = acc
    return out.astype(np.float32)


def maxpool2_loops(x):
    h, w, c = x.shape
    out = np.empty((h // 2, w // 2, c), dtype=np.float32)
    for i in range(h // 2):
        for j in range(w // 2):
            for ch in range(c):
                out[i, j, ch] = x[2 * i : 2 * i + 2, 2 * j : 2 * j + 2, ch].max()
    return out


def maxpool_same_loops(x, k=3):
    h, w, c = x.shape
    out = np.empty_like(x)
    r = k // 2
    for i in range(h):
        for j in range(w):
            lo_i, hi_i = max(0, i - r), min(h, i + r + 1)
            lo_j, hi_j = max(0, j - r), min(w, j + r + 1)
            for ch in range(c):
                out[i, j, ch] = x[lo_i:hi_i, lo_j:hi_j, ch].max()
    return out


def gap_loops(x):
    h, w, c = x.shape
    out = np.empty(c, dtype=np.float64)
    for ch in range(c):
        acc = 0.0
        for i in range(h):
            for j in range(w):
                acc += float(x[i, j, ch])
        out[ch] = acc / (h * w)
    return out.astype(np.float32)


def rand_tensor(rng, shape):
    return rng.standard_normal(shape).astype(np.float32)


# ---------------------------------------------------------------- conv2d


def test_conv2d_identity_1x1_kernel(rng):
    x = rand_tensor(rng, (6, 5, 3))
    kernel = np.eye(3, dtype=np.float32).reshape(1, 1, 3, 3)
    p = ConvParams(kernel=kernel, bias=np.zeros(3, dtype=np.float32))
    np.testing.assert_array_equal(conv2d(x, p), x)


def test_conv2d_same_padding_shape(rng):
    x = rand_tensor(rng, (32, 32, 3))
    p = ConvParams(
        kernel=rand_tensor(rng, (5, 5, 3, 8)), bias=rand_tensor(rng, (8,))
    )
    assert conv2d(x, p).shape == (32, 32, 8)


def test_conv2d_matches_loop_oracle(rng):
    x = rand_tensor(rng, (6, 6, 2))
    kernel = rand_tensor(rng, (3, 3, 2, 4))
    bias = rand_tensor(rng, (4,))
    got = conv2d(x, ConvParams(kernel=kernel, bias=bias))
    want = conv2d_loops(x, kernel, bias)
    np.testing.assert_allclose(got, want, atol=1e-5)


def test_conv2d_channel_mismatch(rng):
    x = rand_tensor(rng, (4, 4, 3))
    p = ConvParams(kernel=rand_tensor(rng, (3, 3, 2, 4)), bias=np.zeros(4, np.float32))
    with pytest.raises(ValueError, match="channels"):
        conv2d(x, p)


def test_conv2d_rejects_even_kernel(rng):
    with pytest.raises(ValueError, match="odd"):
        ConvParams(kernel=rand_tensor(rng, (2, 2, 3, 4)), bias=np.zeros(4, np.float32))


# ---------------------------------------------------------------- batchnorm


def test_batchnorm_identity_params(rng):
    x = rand_tensor(rng, (4, 4, 3))
    p = BatchNormParams(
        gamma=np.ones(3, np.float32), beta=np.zeros(3, np.float32),
        moving_mean=np.zeros(3, np.float32), moving_var=np.ones(3, np.float32),
        epsilon=1e-30,
    )
    np.testing.assert_allclose(batchnorm_infer(x, p), x, atol=1e-6)


def test_batchnorm_affine_by_hand():
    x = np.full((1, 1, 1), 3.0, dtype=np.float32)
    p = BatchNormParams(
        gamma=np.array([2.0], np.float32), beta=np.array([1.0], np.float32),
        moving_mean=np.zeros(1, np.float32), moving_var=np.ones(1, np.float32),
        epsilon=1e-30,
    )
    # 2 * (3 - 0) / sqrt(1) + 1 = 7
    np.testing.assert_allclose(batchnorm_infer(x, p), 7.0, atol=1e-6)


def test_batchnorm_matches_scalar_formula(rng):
    x = rand_tensor(rng, (3, 4, 5))
    gamma, beta = rand_tensor(rng, (5,)), rand_tensor(rng, (5,))
    mean = rand_tensor(rng, (5,))
    var = np.abs(rand_tensor(rng, (5,)))
    eps = 1e-3
    p = BatchNormParams(gamma=gamma, beta=beta, moving_mean=mean,
                        moving_var=var, epsilon=eps)
    got = batchnorm_infer(x, p)
    for idx in np.ndindex(x.shape):
        c = idx[2]
        want = gamma[c] * (x[idx] - mean[c]) / math.sqrt(var[c] + eps) + beta[c]
        assert abs(got[idx] - want) <= 1e-6


def test_batchnorm_length_mismatch(rng):
    x = rand_tensor(rng, (2, 2, 3))
    p = BatchNormParams(
        gamma=np.ones(4, np.float32), beta=np.zeros(4, np.float32),
        moving_mean=np.zeros(4, np.float32), moving_var=np.ones(4, np.float32),
        epsilon=1e-3,
    )
    with pytest.raises(ValueError, match="channels"):
        batchnorm_infer(x, p)


def test_batchnorm_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError, match="epsilon"):
        BatchNormParams(
            gamma=np.ones(1, np.float32), beta=np.zeros(1, np.float32),
            moving_mean=np.zeros(1, np.float32), moving_var=np.ones(1, np.float32),
            epsilon=0.0,
        )


# ---------------------------------------------------------------- activations


def test_leaky_relu_values():
    x = np.array([5.0, -2.0, 0.0], dtype=np.float32)
    got = leaky_relu(x, 0.1)
    np.testing.assert_allclose(got, [5.0, -0.2, 0.0], atol=1e-7)


def test_leaky_relu_alpha_zero_is_relu(rng):
    x = rand_tensor(rng, (50,))
    np.testing.assert_array_equal(leaky_relu(x, 0.0), np.maximum(x, 0.0))


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_leaky_relu_monotone(a, b):
    lo, hi = sorted([a, b])
    x = np.array([lo, hi], dtype=np.float32)
    y = leaky_relu(x, 0.1)
    assert y[0] <= y[1]


def test_sigmoid_zero_is_half():
    assert sigmoid(np.zeros(1, np.float32))[0] == pytest.approx(0.5)


def test_sigmoid_saturation_no_nan():
    x = np.array([-100.0, -40.0, 40.0, 100.0], dtype=np.float32)
    y = sigmoid(x)
    assert np.all(np.isfinite(y))
    assert np.all(y > 0.0) and np.all(y < 1.0)


def test_sigmoid_matches_scalar_formula(rng):
    x = rand_tensor(rng, (100,)) * 5.0
    got = sigmoid(x)
    want = [1.0 / (1.0 + math.exp(-float(v))) for v in x]
    np.testing.assert_allclose(got, want, atol=1e-6)


# ---------------------------------------------------------------- pooling


def test_maxpool2_constant():
    x = np.full((8, 6, 3), 2.5, dtype=np.float32)
    out = maxpool2(x)
    assert out.shape == (4, 3, 3)
    assert np.all(out == 2.5)


def test_maxpool2_paper_shape(rng):
    assert maxpool2(rand_tensor(rng, (32, 32, 32))).shape == (16, 16, 32)


def test_maxpool2_matches_loop_oracle(rng):
    x = rand_tensor(rng, (4, 4, 1))
    np.testing.assert_array_equal(maxpool2(x), maxpool2_loops(x))


def test_maxpool2_rejects_odd_dims(rng):
    with pytest.raises(ValueError, match="even"):
        maxpool2(rand_tensor(rng, (5, 4, 1)))


def test_maxpool_same_constant_identity():
    x = np.full((5, 5, 2), -1.5, dtype=np.float32)
    np.testing.assert_array_equal(maxpool_same(x), x)


def test_maxpool_same_peak_spreads():
    x = np.zeros((5, 5, 1), dtype=np.float32)
    x[2, 2, 0] = 9.0
    out = maxpool_same(x)
    assert np.all(out[1:4, 1:4, 0] == 9.0)
    assert out[0, 0, 0] == 0.0


def test_maxpool_same_matches_loop_oracle(rng):
    x = rand_tensor(rng, (5, 5, 2))
    np.testing.assert_array_equal(maxpool_same(x), maxpool_same_loops(x))


def test_upsample2_block_duplication():
    x = np.array([[[7.0]]], dtype=np.float32)
    out = upsample2(x)
    assert out.shape == (2, 2, 1)
    assert np.all(out == 7.0)


def test_upsample2_paper_shape(rng):
    assert upsample2(rand_tensor(rng, (4, 4, 128))).shape == (8, 8, 128)


def test_maxpool2_inverts_upsample2(rng):
    x = rand_tensor(rng, (6, 7, 3))
    np.testing.assert_array_equal(maxpool2(upsample2(x)), x)


# ---------------------------------------------------------------- concat/GAP


def test_concat_single_input_identity(rng):
    x = rand_tensor(rng, (3, 3, 2))
    np.testing.assert_array_equal(concat_channels([x]), x)


def test_concat_four_branches_shape(rng):
    xs = [rand_tensor(rng, (16, 16, 8)) for _ in range(4)]
    assert concat_channels(xs).shape == (16, 16, 32)


def test_concat_slices_recover_inputs(rng):
    xs = [rand_tensor(rng, (4, 4, c)) for c in (1, 2, 3)]
    out = concat_channels(xs)
    start = 0
    for x in xs:
        c = x.shape[2]
        np.testing.assert_array_equal(out[:, :, start : start + c], x)
        start += c


def test_concat_rejects_spatial_mismatch(rng):
    with pytest.raises(ValueError, match="spatial"):
        concat_channels([rand_tensor(rng, (4, 4, 1)), rand_tensor(rng, (4, 5, 1))])


def test_concat_rejects_empty_list():
    with pytest.raises(ValueError):
        concat_channels([])


def test_gap_output_length(rng):
    assert global_avg_pool(rand_tensor(rng, (4, 4, 128))).shape == (128,)


def test_gap_constant_channel_exact():
    x = np.empty((8, 8, 3), dtype=np.float32)
    vals = np.array([0.1, -2.75, 1e-3], dtype=np.float32)
    x[:] = vals
    np.testing.assert_array_equal(global_avg_pool(x), vals)


def test_gap_matches_summation_oracle(rng):
    x = rand_tensor(rng, (3, 3, 2))
    np.testing.assert_allclose(global_avg_pool(x), gap_loops(x), atol=1e-6)


# ---------------------------------------------------------------- properties


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(1, 6), w=st.integers(1, 6),
    cin=st.integers(1, 3), cout=st.integers(1, 3),
    ksize=st.sampled_from([1, 3, 5]),
)
def test_shape_algebra_conv(h, w, cin, cout, ksize):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((h, w, cin)).astype(np.float32)
    p = ConvParams(
        kernel=rng.standard_normal((ksize, ksize, cin, cout)).astype(np.float32),
        bias=rng.standard_normal(cout).astype(np.float32),
    )
    assert conv2d(x, p).shape == (h, w, cout)


@settings(max_examples=40, deadline=None)
@given(h=st.integers(1, 8), w=st.integers(1, 8), c=st.integers(1, 4))
def test_shape_algebra_pool_upsample(h, w, c):
    rng = np.random.default_rng(11)
    x = rng.standard_normal((h, w, c)).astype(np.float32)
    assert upsample2(x).shape == (2 * h, 2 * w, c)
    assert maxpool_same(x).shape == (h, w, c)
    if h % 2 == 0 and w % 2 == 0:
        assert maxpool2(x).shape == (h // 2, w // 2, c)


def test_ops_are_pure(rng):
    x = rand_tensor(rng, (6, 6, 2))
    p = ConvParams(kernel=rand_tensor(rng, (3, 3, 2, 2)), bias=rand_tensor(rng, (2,)))
    first = conv2d(x, p)
    second = conv2d(x, p)
    np.testing.assert_array_equal(first, second)
