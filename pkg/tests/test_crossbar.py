import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import direct_conv2d, direct_transposed_conv2d
from spinsim.crossbar import (
    DEFAULT_PAIR,
    DeviceNoise,
    col2im,
    conv2d,
    conv2d_ideal,
    decode_weights,
    deconv2d,
    encode_weights,
    im2col,
    load_tensor,
    mvm,
    save_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
    zero_insert,
)

PAIR = DEFAULT_PAIR


def test_encode_zero_and_extremes():
    xb = encode_weights([[0.0, 1.0, -1.0]], PAIR)
    np.testing.assert_allclose(xb.g[0], [PAIR.g_parallel, PAIR.g_p, PAIR.g_ap], rtol=1e-15)
    q = xb.wall_positions()[0]
    np.testing.assert_allclose(q, [250e-9, 500e-9, 0.0], atol=1e-21)
    assert xb.synapse(0, 1).q == pytest.approx(500e-9)


def test_encode_round_trip_and_clipping():
    w = np.random.default_rng(0).uniform(-1, 1, (4, 3))
    np.testing.assert_allclose(decode_weights(encode_weights(w, PAIR)), w, atol=1e-12)
    xb = encode_weights([[2.0, -3.0, 0.5]], PAIR)
    assert xb.n_clipped == 2
    np.testing.assert_allclose(decode_weights(xb), [[1.0, -1.0, 0.5]], atol=1e-12)
    assert np.all(np.abs(xb.g - xb.g_par) <= 0.5 * (PAIR.g_p - PAIR.g_ap) * (1 + 1e-12))


def test_mvm_selector_and_zero():
    w = np.random.default_rng(1).uniform(-1, 1, (5, 4))
    xb = encode_weights(w, PAIR)
    assert np.all(mvm(xb, np.zeros(5)) == 0.0)
    e = np.zeros(5)
    e[2] = 1.0
    np.testing.assert_allclose(mvm(xb, e) / xb.g_unit, w[2], rtol=1e-10)
    with pytest.raises(ValueError):
        mvm(xb, np.zeros(4))


def test_mvm_matches_matmul():
    gen = np.random.default_rng(2)
    for _ in range(20):
        w = gen.uniform(-1, 1, (7, 3))
        v = gen.uniform(-0.1, 0.1, 7)
        got = mvm(encode_weights(w, PAIR), v)
        ref = v @ w * (0.5 * (PAIR.g_p - PAIR.g_ap))
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-22)


@settings(max_examples=50, deadline=None)
@given(
    hnp.arrays(float, (6, 2), elements=st.floats(-1, 1)),
    hnp.arrays(float, 6, elements=st.floats(-0.1, 0.1)),
    hnp.arrays(float, 6, elements=st.floats(-0.1, 0.1)),
)
def test_mvm_linearity(w, x, y):
    xb = encode_weights(w, PAIR)
    np.testing.assert_allclose(mvm(xb, x + y), mvm(xb, x) + mvm(xb, y), atol=1e-12 * PAIR.g_p)


def test_noise_is_seeded_and_optional():
    w = np.random.default_rng(3).uniform(-1, 1, (4, 4))
    noise = DeviceNoise(program_sigma=0.01)
    a = encode_weights(w, PAIR, noise=noise, rng=np.random.default_rng(7)).g
    b = encode_weights(w, PAIR, noise=noise, rng=np.random.default_rng(7)).g
    assert np.array_equal(a, b)
    assert not np.array_equal(a, encode_weights(w, PAIR).g)
    with pytest.raises(ValueError):
        encode_weights(w, PAIR, noise=noise)


def test_conv_identity_and_ones():
    x = np.random.default_rng(4).normal(size=(5, 5, 1))
    np.testing.assert_allclose(conv2d(x, np.ones((1, 1, 1, 1))), x, rtol=1e-12)
    out = conv2d(np.ones((5, 5, 1)), np.ones((3, 3, 1, 1)), padding=1)[..., 0]
    assert out[2, 2] == pytest.approx(9.0)
    assert out[0, 0] == pytest.approx(4.0)
    assert out[0, 2] == pytest.approx(6.0)


def test_conv_matches_nested_loops():
    gen = np.random.default_rng(5)
    for trial in range(50):
        h, w = gen.integers(3, 8, 2)
        cin, cout = gen.integers(1, 4, 2)
        k = int(gen.choice([1, 3, 5]))
        stride, pad = int(gen.integers(1, 3)), int(gen.integers(0, (k + 1) // 2 + 1))
        if h + 2 * pad < k or w + 2 * pad < k:
            continue
        x = gen.normal(size=(h, w, cin))
        kern = gen.normal(size=(k, k, cin, cout))
        ref = direct_conv2d(x, kern, stride, pad)
        np.testing.assert_allclose(conv2d(x, kern, stride, pad), ref, atol=1e-9)
        np.testing.assert_allclose(conv2d_ideal(x, kern, stride, pad), ref, atol=1e-12)


def test_conv_shape_errors():
    with pytest.raises(ValueError):
        conv2d(np.ones((4, 4, 2)), np.ones((3, 3, 1, 1)))
    with pytest.raises(ValueError):
        conv2d(np.ones((4, 4, 1)), np.ones((2, 2, 1, 1)))
    with pytest.raises(ValueError):
        conv2d(np.ones((4, 4)), np.ones((3, 3, 1, 1)))


def test_zero_insert_layout():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])[..., None]
    z = zero_insert(x)[..., 0]
    assert z.shape == (5, 5)
    assert (z[1, 1], z[1, 3], z[3, 1], z[3, 3]) == (1.0, 2.0, 3.0, 4.0)
    assert z.sum() == 10.0 and np.count_nonzero(z) == 4
    assert np.all(zero_insert(np.zeros((3, 2, 2))) == 0) and zero_insert(np.zeros((3, 2, 2))).shape == (7, 5, 2)


def test_deconv_impulse_response():
    kern = np.random.default_rng(6).normal(size=(3, 3, 1, 1))
    x = np.zeros((4, 4, 1))
    x[1, 2] = 1.0
    out = deconv2d(x, kern)[..., 0]
    assert out.shape == (8, 8)
    # the flipped kernel is stamped around the upsampled site (2, 4)
    np.testing.assert_allclose(out[1:4, 3:6], kern[::-1, ::-1, 0, 0], atol=1e-12)
    mask = np.ones_like(out, bool)
    mask[1:4, 3:6] = False
    assert np.all(np.abs(out[mask]) < 1e-12)


def test_deconv_matches_transposed_conv_oracle():
    gen = np.random.default_rng(7)
    for _ in range(50):
        h, w = gen.integers(2, 6, 2)
        cin, cout = gen.integers(1, 4, 2)
        k = int(gen.choice([1, 3, 5]))
        y = gen.normal(size=(h, w, cin))
        kern = gen.normal(size=(k, k, cin, cout))
        out = deconv2d(y, kern)
        assert out.shape == (2 * h, 2 * w, cout)
        adj_kernel = kern[::-1, ::-1].transpose(0, 1, 3, 2)
        np.testing.assert_allclose(out, direct_transposed_conv2d(y, adj_kernel), atol=1e-9)


def test_deconv_is_adjoint_of_strided_conv():
    gen = np.random.default_rng(8)
    y = gen.normal(size=(3, 4, 2))
    kern = gen.normal(size=(3, 3, 2, 3))
    x = gen.normal(size=(6, 8, 3))
    adj_kernel = kern[::-1, ::-1].transpose(0, 1, 3, 2)
    lhs = np.sum(conv2d_ideal(x, adj_kernel, 2, 1) * y)
    rhs = np.sum(x * deconv2d(y, kern))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_col2im_is_adjoint_of_im2col():
    gen = np.random.default_rng(9)
    x = gen.normal(size=(2, 5, 6, 3))
    for stride, pad in ((1, 1), (2, 1), (1, 0)):
        cols = im2col(x, 3, stride, pad)
        c = gen.normal(size=cols.shape)
        lhs = np.sum(cols * c)
        rhs = np.sum(x * col2im(c, x.shape, 3, stride, pad))
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_batched_conv_equals_per_image():
    gen = np.random.default_rng(10)
    x = gen.normal(size=(3, 5, 5, 2))
    kern = gen.normal(size=(3, 3, 2, 4))
    batch = conv2d(x, kern, padding=1)
    for n in range(3):
        np.testing.assert_allclose(batch[n], conv2d_ideal(x[n], kern, padding=1), atol=1e-9)


def test_conv_is_deterministic():
    gen = np.random.default_rng(11)
    x, kern = gen.normal(size=(6, 6, 2)), gen.normal(size=(3, 3, 2, 2))
    assert np.array_equal(conv2d(x, kern, padding=1), conv2d(x, kern, padding=1))


@pytest.mark.parametrize("dtype", [np.float64, np.float32, np.int64, np.int32, np.uint8])
def test_tensor_round_trip(tmp_path, dtype):
    a = (np.arange(24).reshape(2, 3, 4) % 7).astype(dtype)
    save_tensor(tmp_path / "t.bin", a)
    b = load_tensor(tmp_path / "t.bin")
    assert b.dtype == a.dtype and b.shape == a.shape and np.array_equal(a, b)


def test_tensor_header_layout():
    buf = tensor_to_bytes(np.zeros((2, 3)))
    assert buf[:4] == b"SPTN" and len(buf) == 4 + 4 + 16 + 48
    with pytest.raises(ValueError):
        tensor_from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(ValueError):
        tensor_from_bytes(buf[:-8])
