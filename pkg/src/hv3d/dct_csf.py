"""Orthonormal 2-D DCT kernels, two-view fusion and the JPEG-derived CSF mask."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "JPEG_LUMA_QTABLE",
    "dct_matrix",
    "dct2",
    "idct2",
    "dct2_batch",
    "idct2_batch",
    "fuse_blocks_3d_dct",
    "fuse_blocks_batch",
    "build_csf_mask",
    "apply_csf",
    "bicubic_resize_matrix",
]

# Baseline luminance quantization table of the JPEG standard (Annex K).
JPEG_LUMA_QTABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)
JPEG_LUMA_QTABLE.setflags(write=False)


@lru_cache(maxsize=None)
def dct_matrix(m: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``T`` with ``dct(x) = T @ x``."""
    if m < 1:
        raise ValueError("DCT length must be positive")
    n = np.arange(m)
    t = np.cos(np.pi * (2 * n[None, :] + 1) * n[:, None] / (2 * m))
    t *= np.sqrt(2.0 / m)
    t[0] /= np.sqrt(2.0)
    t.setflags(write=False)
    return t


def _square(block, name="block") -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise ValueError(f"{name} must be square, got shape {block.shape}")
    if block.shape[0] < 2:
        raise ValueError(f"{name} side must be >= 2")
    return block


def dct2(block) -> np.ndarray:
    """Orthonormal type-II 2-D DCT of a square block."""
    b = _square(block)
    t = dct_matrix(b.shape[0])
    return t @ b @ t.T


def idct2(coeffs) -> np.ndarray:
    c = _square(coeffs, "coefficient block")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    t = dct_matrix(c.shape[0])
    return t.T @ c @ t


def dct2_batch(blocks: np.ndarray) -> np.ndarray:
    """DCT of a stack of ``(n, m, m)`` blocks."""
    blocks = np.asarray(blocks, dtype=np.float64)
    t = dct_matrix(blocks.shape[-1])
    return t @ blocks @ t.T


def idct2_batch(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    t = dct_matrix(coeffs.shape[-1])
    return t.T @ coeffs @ t


def fuse_blocks_3d_dct(left, right) -> np.ndarray:
    """Low-frequency slice of the m x m x 2 orthonormal 3-D DCT of a block pair.

    Along the two-sample view axis the DCT-II is ``[1, 1] / sqrt(2)`` for the
    retained slice, so the result is ``(dct2(left) + dct2(right)) / sqrt(2)``.
    The high-frequency slice is dropped.
    """
    left = _square(left, "left block")
    right = _square(right, "right block")
    if left.shape != right.shape:
        raise ValueError(f"block sizes differ: {left.shape} vs {right.shape}")
    return dct2((left + right) / np.sqrt(2.0))


def fuse_blocks_batch(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape:
        raise ValueError(f"block stacks differ: {left.shape} vs {right.shape}")
    return dct2_batch((left + right) / np.sqrt(2.0))


def _cubic(x: np.ndarray) -> np.ndarray:
    # Keys kernel, a = -0.5
    ax = np.abs(x)
    ax2, ax3 = ax * ax, ax * ax * ax
    return ((1.5 * ax3 - 2.5 * ax2 + 1.0) * (ax <= 1)
            + (-0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0) * ((ax > 1) & (ax <= 2)))


def bicubic_resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """1-D bicubic resampling matrix (``n_out x n_in``).

    Pixel-centre registration with symmetric boundary extension; when
    shrinking, the kernel is stretched by the inverse scale to antialias.
    """
    scale = n_out / n_in
    kscale = min(scale, 1.0)
    width = 4.0 / kscale
    x = np.arange(1, n_out + 1, dtype=np.float64)
    u = x / scale + 0.5 * (1.0 - 1.0 / scale)
    left = np.floor(u - width / 2.0)
    taps = int(np.ceil(width)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    w = kscale * _cubic(kscale * (u[:, None] - idx))
    w /= w.sum(axis=1, keepdims=True)
    # symmetric (half-sample) reflection of 1-based indices into [1, n_in]
    j = idx - 1
    period = 2 * n_in
    j = np.mod(j, period)
    j = np.where(j >= n_in, period - 1 - j, j).astype(int)
    r = np.zeros((n_out, n_in))
    for row in range(n_out):
        np.add.at(r[row], j[row], w[row])
    return r


@lru_cache(maxsize=None)
def _csf_mask_cached(m: int) -> np.ndarray:
    base = 1.0 / JPEG_LUMA_QTABLE
    base = base / base.mean()
    if m == 8:
        mask = base
    else:
        r = bicubic_resize_matrix(8, m)
        mask = r @ base @ r.T
        if np.any(mask <= 0):
            raise ValueError(f"interpolated CSF mask for m={m} is not positive")
        mask = mask / mask.mean()
    mask = np.array(mask)
    mask.setflags(write=False)
    return mask


def build_csf_mask(m: int) -> np.ndarray:
    """CSF weighting mask of side ``m`` with unit mean.

    For ``m == 8`` the weights are the element-wise reciprocals of the JPEG
    luminance quantization table, scaled to mean one. Other sizes are
    bicubically resampled from the 8 x 8 mask and rescaled to mean one.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"mask side must be an integer >= 2, got {m}")
    return _csf_mask_cached(int(m))


def apply_csf(x, mask) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if x.shape[-2:] != mask.shape:
        raise ValueError(f"coefficient block {x.shape[-2:]} does not match mask {mask.shape}")
    return x * mask
