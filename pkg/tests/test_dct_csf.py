import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.fft import dctn

from hv3d.dct_csf import (
    JPEG_LUMA_QTABLE,
    apply_csf,
    bicubic_resize_matrix,
    build_csf_mask,
    dct2,
    dct2_batch,
    dct_matrix,
    fuse_blocks_3d_dct,
    fuse_blocks_batch,
    idct2,
    idct2_batch,
)

blocks8 = arrays(np.float64, (8, 8), elements=st.floats(-255, 255, allow_nan=False))


@pytest.mark.parametrize("m", [2, 4, 8, 16])
def test_dct_matrix_orthonormal(m):
    c = dct_matrix(m)
    assert np.allclose(c @ c.T, np.eye(m), atol=1e-12)


@pytest.mark.parametrize("m", [4, 8, 16])
def test_dct2_matches_scipy(m):
    block = np.random.default_rng(m).uniform(0, 255, (m, m))
    assert np.allclose(dct2(block), dctn(block, type=2, norm="ortho"), atol=1e-9)


def test_dc_coefficient():
    # a constant block of value v has DC = m * v in the orthonormal transform
    assert dct2(np.full((8, 8), 3.0))[0, 0] == pytest.approx(24.0)


def test_batch_agrees_with_single():
    rng = np.random.default_rng(1)
    stack = rng.uniform(0, 255, (5, 8, 8))
    batch = dct2_batch(stack)
    for i in range(5):
        assert np.allclose(batch[i], dct2(stack[i]))
    assert np.allclose(idct2_batch(batch), stack)


@settings(max_examples=50, deadline=None)
@given(blocks8)
def test_idct_inverts(block):
    assert np.allclose(idct2(dct2(block)), block, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(blocks8, blocks8)
def test_fusion_is_scaled_sum(left, right):
    fused = fuse_blocks_3d_dct(left, right)
    assert np.allclose(fused, dct2((left + right) / np.sqrt(2.0)), atol=1e-9)
    # symmetric in the two views
    assert np.allclose(fused, fuse_blocks_3d_dct(right, left), atol=1e-12)


def test_fusion_identical_views():
    block = np.random.default_rng(3).uniform(0, 255, (8, 8))
    assert np.allclose(fuse_blocks_3d_dct(block, block), np.sqrt(2.0) * dct2(block))


def test_fusion_batch():
    rng = np.random.default_rng(4)
    left, right = rng.uniform(0, 255, (2, 6, 4, 4))
    batch = fuse_blocks_batch(left, right)
    for i in range(6):
        assert np.allclose(batch[i], fuse_blocks_3d_dct(left[i], right[i]))


def test_fusion_shape_mismatch():
    with pytest.raises(ValueError):
        fuse_blocks_3d_dct(np.zeros((4, 4)), np.zeros((8, 8)))


def test_csf_mask_m8_is_inverse_table():
    inv = 1.0 / JPEG_LUMA_QTABLE
    assert np.allclose(build_csf_mask(8), inv / inv.mean(), rtol=0, atol=1e-12)


@pytest.mark.parametrize("m", [2, 3, 4, 6, 12, 16, 32, 64])
def test_csf_mask_properties(m):
    mask = build_csf_mask(m)
    assert mask.shape == (m, m)
    assert abs(mask.mean() - 1.0) < 1e-9
    assert np.all(mask > 0)
    # the highest frequency is weighted well below DC
    assert mask[-1, -1] < 0.5 * mask[0, 0]


def test_csf_mask_read_only():
    with pytest.raises(ValueError):
        build_csf_mask(16)[0, 0] = 0.0


def test_csf_mask_rejects_bad_size():
    with pytest.raises(ValueError):
        build_csf_mask(1)


@pytest.mark.parametrize("n_in, n_out", [(8, 16), (8, 4), (8, 8), (8, 3)])
def test_resize_rows_sum_to_one(n_in, n_out):
    r = bicubic_resize_matrix(n_in, n_out)
    assert r.shape == (n_out, n_in)
    assert np.allclose(r.sum(axis=1), 1.0)


def test_resize_identity():
    assert np.allclose(bicubic_resize_matrix(8, 8), np.eye(8))


def test_apply_csf():
    coeffs = np.ones((3, 8, 8))
    assert np.allclose(apply_csf(coeffs, build_csf_mask(8)), build_csf_mask(8))


def test_two_point_basis():
    assert np.allclose(dct2(np.array([[1.0, 0.0], [0.0, 0.0]])), 0.5)


def test_dc_only_inverse():
    coeffs = np.zeros((4, 4))
    coeffs[0, 0] = 8.0
    assert np.allclose(idct2(coeffs), 2.0)
    assert not idct2(np.zeros((4, 4))).any()


def test_parseval():
    block = np.random.default_rng(8).uniform(0, 255, (8, 8))
    assert abs((dct2(block) ** 2).sum() - (block ** 2).sum()) < 1e-6


def test_apply_csf_trivial_masks():
    x = np.random.default_rng(2).normal(size=(8, 8))
    assert np.array_equal(apply_csf(x, np.ones((8, 8))), x)
    assert not apply_csf(np.zeros((8, 8)), build_csf_mask(8)).any()
    assert apply_csf(np.ones((8, 8)), build_csf_mask(8)).mean() == pytest.approx(1.0)
