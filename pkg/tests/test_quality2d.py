import math

import numpy as np
import pytest
from scipy.signal import convolve2d

from hv3d.quality2d import (
    DEFAULT_SSIM,
    PSNR_CAP_DB,
    SsimConstants,
    psnr,
    ssim_block,
    ssim_blocks,
    ssim_image,
    vif,
)
from hv3d.video_io import Frame

@pytest.fixture
def skimage_metrics():
    return pytest.importorskip("skimage.metrics")


def _pair(seed=0, shape=(64, 80), noise=20.0):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, shape).astype(np.uint8)
    b = np.clip(a + rng.normal(0, noise, shape), 0, 255).astype(np.uint8)
    return a, b


def ssim_direct(x, y, k1=0.01, k2=0.03, rng=255.0):
    x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
    c1, c2 = (k1 * rng) ** 2, (k2 * rng) ** 2
    mx, my = x.mean(), y.mean()
    vx, vy = ((x - mx) ** 2).mean(), ((y - my) ** 2).mean()
    cxy = ((x - mx) * (y - my)).mean()
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def vifp_loop(ref, dist, sigma_nsq=2.0, eps=1e-10):
    """Pixel-domain VIF written out scale by scale with plain 2-D convolutions."""
    ref, dist = np.asarray(ref, float), np.asarray(dist, float)
    num = den = 0.0
    for scale in range(1, 5):
        n = 2 ** (4 - scale + 1) + 1
        ax = np.arange(n) - (n - 1) / 2
        g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * (n / 5.0) ** 2))
        g /= g.sum()
        if scale > 1:
            if min(ref.shape) < n:
                break
            ref = convolve2d(ref, g, mode="valid")[::2, ::2]
            dist = convolve2d(dist, g, mode="valid")[::2, ::2]
        if min(ref.shape) < n:
            break
        mu1, mu2 = convolve2d(ref, g, "valid"), convolve2d(dist, g, "valid")
        s1 = convolve2d(ref * ref, g, "valid") - mu1 ** 2
        s2 = convolve2d(dist * dist, g, "valid") - mu2 ** 2
        s12 = convolve2d(ref * dist, g, "valid") - mu1 * mu2
        s1, s2 = np.maximum(s1, 0), np.maximum(s2, 0)
        gain = s12 / (s1 + eps)
        sv = s2 - gain * s12
        gain[s1 < eps] = 0
        sv[s1 < eps] = s2[s1 < eps]
        s1[s1 < eps] = 0
        gain[s2 < eps] = 0
        sv[s2 < eps] = 0
        sv[gain < 0] = s2[gain < 0]
        gain[gain < 0] = 0
        sv = np.maximum(sv, eps)
        num += np.sum(np.log10(1 + gain * gain * s1 / (sv + sigma_nsq)))
        den += np.sum(np.log10(1 + s1 / sigma_nsq))
    return num / den


def test_constants():
    assert DEFAULT_SSIM.c1 == pytest.approx((0.01 * 255) ** 2)
    assert DEFAULT_SSIM.c2 == pytest.approx((0.03 * 255) ** 2)


def test_ssim_block_constant_pair():
    a, b = np.full((8, 8), 100.0), np.full((8, 8), 150.0)
    c1 = (0.01 * 255) ** 2
    expected = (2 * 100 * 150 + c1) / (100 ** 2 + 150 ** 2 + c1)
    assert ssim_block(a, b) == pytest.approx(expected, abs=1e-15)
    assert ssim_block(a, b) == pytest.approx(0.923092310530793, abs=1e-12)


def test_ssim_block_identity_and_symmetry():
    a, b = _pair()
    assert ssim_block(a[:16, :16], a[:16, :16]) == 1.0
    assert ssim_block(a[:16, :16], b[:16, :16]) == pytest.approx(
        ssim_block(b[:16, :16], a[:16, :16]))


def test_ssim_blocks_matches_direct():
    a, b = _pair(1)
    blocks_a = a[:48, :48].reshape(3, 16, 3, 16).swapaxes(1, 2).reshape(9, 16, 16)
    blocks_b = b[:48, :48].reshape(3, 16, 3, 16).swapaxes(1, 2).reshape(9, 16, 16)
    got = ssim_blocks(blocks_a, blocks_b)
    want = [ssim_direct(x, y) for x, y in zip(blocks_a, blocks_b)]
    assert np.allclose(got, want, atol=1e-12)


def test_ssim_custom_constants():
    consts = SsimConstants(k1=0.02, k2=0.05, dynamic_range=1.0)
    a, b = np.full((4, 4), 0.2), np.full((4, 4), 0.4)
    assert ssim_block(a, b, consts) == pytest.approx(ssim_direct(a, b, 0.02, 0.05, 1.0))


def test_ssim_image_matches_skimage(skimage_metrics):
    a, b = _pair(2)
    want = skimage_metrics.structural_similarity(
        a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=255)
    assert ssim_image(a, b) == pytest.approx(want, abs=1e-12)


def test_psnr_matches_skimage(skimage_metrics):
    a, b = _pair(3)
    want = skimage_metrics.peak_signal_noise_ratio(a, b, data_range=255)
    assert psnr(a, b) == pytest.approx(want, abs=1e-10)


def test_psnr_values():
    a = np.zeros((4, 4), np.uint8)
    b = a.copy()
    b[:] = 1
    assert psnr(a, b) == pytest.approx(20 * math.log10(255.0))
    assert psnr(a, a) == PSNR_CAP_DB
    assert psnr(Frame(a), Frame(b)) == psnr(a, b)


def test_vif_identity_exact():
    a, _ = _pair(4)
    assert vif(a, a) == 1.0


@pytest.mark.parametrize("seed", [0, 5])
def test_vif_matches_loop_oracle(seed):
    a, b = _pair(seed, shape=(96, 96))
    assert vif(a, b) == pytest.approx(vifp_loop(a, b), rel=1e-9)


def test_vif_decreases_with_noise():
    a, _ = _pair(6)
    scores = [vif(a, _pair(6, noise=s)[1]) for s in (2.0, 10.0, 40.0)]
    assert scores[0] > scores[1] > scores[2] > 0


def test_vif_small_input_uses_available_scales():
    a, b = _pair(7, shape=(20, 20))
    assert vif(a, b) == pytest.approx(vifp_loop(a, b), rel=1e-9)


def test_ssim_contrast_inversion_negative():
    a = np.random.default_rng(9).uniform(0, 255, (8, 8))
    assert ssim_block(a, -a + 2 * a.mean()) < 0


def test_vif_blur_and_constant():
    from scipy.ndimage import gaussian_filter

    tex = gaussian_filter(np.random.default_rng(1).uniform(0, 255, (96, 96)), 1.0)
    light, heavy = gaussian_filter(tex, 0.8), gaussian_filter(tex, 3.0)
    assert vif(tex, heavy) < vif(tex, light)
    assert vif(tex, np.full_like(tex, 128.0)) < 0.05


def test_psnr_offsets():
    z = np.zeros((8, 8), np.uint8)
    assert psnr(z, z + 1) == pytest.approx(48.13, abs=5e-3)
    assert psnr(z, z + 16) == pytest.approx(24.05, abs=5e-3)
