"""2-D quality primitives: single-window block SSIM, pixel-domain VIF, PSNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "SsimConstants",
    "DEFAULT_SSIM",
    "VIF_VARIANT",
    "ssim_block",
    "ssim_blocks",
    "ssim_image",
    "vif",
    "psnr",
    "PSNR_CAP_DB",
]

VIF_VARIANT = "vifp-pixel-domain-4scale"
PSNR_CAP_DB = 100.0


@dataclass(frozen=True)
class SsimConstants:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ValueError("SSIM constants must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


DEFAULT_SSIM = SsimConstants()


def ssim_blocks(a: np.ndarray, b: np.ndarray, consts: SsimConstants = DEFAULT_SSIM) -> np.ndarray:
    """Single-window SSIM for each pair in two ``(n, h, w)`` stacks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"block shapes differ: {a.shape} vs {b.shape}")
    axes = (-2, -1)
    mu_a = a.mean(axis=axes, keepdims=True)
    mu_b = b.mean(axis=axes, keepdims=True)
    da, db = a - mu_a, b - mu_b
    var_a = (da * da).mean(axis=axes)
    var_b = (db * db).mean(axis=axes)
    cov = (da * db).mean(axis=axes)
    mu_a, mu_b = mu_a[..., 0, 0], mu_b[..., 0, 0]
    c1, c2 = consts.c1, consts.c2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim_block(a, b, consts: SsimConstants = DEFAULT_SSIM) -> float:
    """SSIM of two equally sized blocks using one window spanning the block."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"need two equally sized 2-D blocks, got {a.shape} and {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    return float(ssim_blocks(a[None], b[None], consts)[0])


def ssim_image(ref, dist, consts: SsimConstants = DEFAULT_SSIM, sigma: float = 1.5) -> float:
    """Mean SSIM with an 11 x 11 Gaussian window (frame-level baseline)."""
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(dist, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    radius = 5

    def blur(img):
        return ndimage.gaussian_filter(img, sigma, mode="reflect", truncate=radius / sigma)

    mx, my = blur(x), blur(y)
    sxx = blur(x * x) - mx * mx
    syy = blur(y * y) - my * my
    sxy = blur(x * y) - mx * my
    c1, c2 = consts.c1, consts.c2
    smap = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    if min(smap.shape) > 2 * radius:
        smap = smap[radius:-radius, radius:-radius]
    return float(smap.mean())


def _gauss_taps(n: int) -> np.ndarray:
    sigma = n / 5.0
    x = np.arange(n) - (n - 1) / 2.0
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    r = len(taps) // 2
    out = ndimage.correlate1d(img, taps, axis=0, mode="constant")
    out = ndimage.correlate1d(out, taps, axis=1, mode="constant")
    return out[r:img.shape[0] - r, r:img.shape[1] - r]


def vif(ref, dist, sigma_nsq: float = 2.0, eps: float = 1e-10) -> float:
    """Pixel-domain visual information fidelity.

    Four dyadic scales with Gaussian windows of 17, 9, 5 and 3 taps; each
    coarser scale is the smoothed, 2x decimated previous one. Scales whose
    window no longer fits the image are skipped.

    Returns
    -------
    float
        Sum of distorted-channel information over sum of reference-channel
        information; exactly 1.0 for identical inputs.
    """
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(dist, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"need two equally sized 2-D images, got {x.shape} and {y.shape}")
    if np.array_equal(x, y):
        return 1.0
    num = 0.0
    den = 0.0
    used = 0
    for scale in range(1, 5):
        n = 2 ** (4 - scale + 1) + 1
        taps = _gauss_taps(n)
        if scale > 1:
            if min(x.shape) < n:
                break
            x = _filter_valid(x, taps)[::2, ::2]
            y = _filter_valid(y, taps)[::2, ::2]
        if min(x.shape) < n:
            break
        mu1 = _filter_valid(x, taps)
        mu2 = _filter_valid(y, taps)
        s1 = _filter_valid(x * x, taps) - mu1 * mu1
        s2 = _filter_valid(y * y, taps) - mu2 * mu2
        s12 = _filter_valid(x * y, taps) - mu1 * mu2
        s1 = np.maximum(s1, 0.0)
        s2 = np.maximum(s2, 0.0)

        g = s12 / (s1 + eps)
        sv = s2 - g * s12

        g = np.where(s1 < eps, 0.0, g)
        sv = np.where(s1 < eps, s2, sv)
        s1 = np.where(s1 < eps, 0.0, s1)

        g = np.where(s2 < eps, 0.0, g)
        sv = np.where(s2 < eps, 0.0, sv)

        sv = np.where(g < 0, s2, sv)
        g = np.maximum(g, 0.0)
        sv = np.maximum(sv, eps)

        num += np.sum(np.log10(1.0 + g * g * s1 / (sv + sigma_nsq)))
        den += np.sum(np.log10(1.0 + s1 / sigma_nsq))
        used += 1
    if used == 0:
        raise ValueError(f"image {np.shape(ref)} too small for VIF (needs >= 17 px)")
    if den < eps:
        # reference carries no information at any scale
        return 1.0 if num < eps else float(num / eps)
    return float(num / den)


def psnr(ref, dist, peak: float = 255.0) -> float:
    """PSNR in dB; identical inputs return :data:`PSNR_CAP_DB`."""
    a = ref.luma if hasattr(ref, "luma") else ref
    b = dist.luma if hasattr(dist, "luma") else dist
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame sizes differ: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse)))
