"""Procedural stereo clips with exact disparity maps, used as bundled test content."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .video_io import DisparityMap, StereoSequence, VideoSequence

__all__ = ["texture", "make_stereo_clip", "make_translation_clip", "write_clip"]


def texture(rng: np.random.Generator, height: int, width: int, smooth: float = 1.2,
            lo: float = 30.0, hi: float = 225.0) -> np.ndarray:
    """Band-limited random texture stretched to ``[lo, hi]``, uint8."""
    t = ndimage.gaussian_filter(rng.standard_normal((height, width)), smooth, mode="wrap")
    t = (t - t.min()) / max(t.max() - t.min(), 1e-12)
    return np.rint(lo + (hi - lo) * t).astype(np.uint8)


def _maps(values, scale=1.0):
    return tuple(DisparityMap(v.astype(np.uint8), scale) for v in values)


def make_stereo_clip(width: int = 320, height: int = 192, frames: int = 64, seed: int = 0,
                     fps: float = 25.0) -> StereoSequence:
    """Layered scene: a receding background plus two moving foreground boxes.

    Background disparity grows from 2 px at the top row to 8 px at the
    bottom; the boxes sit at 12 and 18 px. Right-view positions follow
    ``x_right = x_left - disparity``.
    """
    if width < 64 or height < 64:
        raise ValueError("synthetic clips need at least 64x64 pixels")
    rng = np.random.default_rng(seed)
    margin = 32
    bg = texture(rng, height, width + 2 * margin)
    # box layout is specified at 320x192 and scaled to the requested size
    sx, sy = width / 320.0, height / 192.0

    def px(v, s):
        return max(1, int(round(v * s)))

    boxes = [
        dict(tex=texture(rng, px(56, sy), px(72, sx), 1.0), y=px(40, sy), x0=px(40, sx),
             vx=2, d=12),
        dict(tex=texture(rng, px(48, sy), px(48, sx), 0.8), y=px(110, sy), x0=px(220, sx),
             vx=-1, d=18),
    ]
    bg_disp = np.rint(2 + 6 * np.arange(height) / max(height - 1, 1)).astype(int)

    lefts, rights, l2r, r2l = [], [], [], []
    cols = np.arange(width)
    for t in range(frames):
        left = np.empty((height, width), np.uint8)
        right = np.empty((height, width), np.uint8)
        dl = np.empty((height, width), np.int64)
        dr = np.empty((height, width), np.int64)
        drift = t // 4  # slow pan of the background
        for y in range(height):
            d = bg_disp[y]
            left[y] = bg[y, cols + margin + drift % margin]
            right[y] = bg[y, cols + margin + drift % margin + d]
            dl[y] = d
            dr[y] = d
        for b in boxes:
            bh, bw = b["tex"].shape
            x = int(b["x0"] + b["vx"] * t) % (width - bw)
            for view, dmap, shift in ((left, dl, 0), (right, dr, b["d"])):
                xs = x - shift
                lo, hi = max(xs, 0), min(xs + bw, width)
                if hi <= lo:
                    continue
                view[b["y"]:b["y"] + bh, lo:hi] = b["tex"][:, lo - xs:hi - xs]
                dmap[b["y"]:b["y"] + bh, lo:hi] = b["d"]
        lefts.append(left)
        rights.append(right)
        l2r.append(dl)
        r2l.append(dr)
    return StereoSequence(
        VideoSequence.from_array(np.stack(lefts), fps),
        VideoSequence.from_array(np.stack(rights), fps),
        _maps(l2r), _maps(r2l),
    )


def make_translation_clip(width: int = 320, height: int = 192, frames: int = 4,
                          disparity: int = 6, seed: int = 0, band: int = 64,
                          fps: float = 25.0) -> StereoSequence:
    """Pure horizontal translation: ``right[x] = left[x + disparity]`` everywhere.

    Both views are crops of one texture whose outer ``band`` columns are flat,
    so blocks whose true match would leave the frame still agree with the
    clamped disparity seed.
    """
    rng = np.random.default_rng(seed)
    wide = width + disparity
    lefts, rights = [], []
    for _ in range(frames):
        tex = texture(rng, height, wide, 1.0)
        tex[:, :band] = 128
        tex[:, wide - band:] = 128
        lefts.append(tex[:, :width])
        rights.append(tex[:, disparity:disparity + width])
    dmap = np.full((height, width), disparity)
    return StereoSequence(
        VideoSequence.from_array(np.stack(lefts), fps),
        VideoSequence.from_array(np.stack(rights), fps),
        _maps([dmap] * frames), _maps([dmap] * frames),
    )


def write_clip(out_dir, stereo: StereoSequence):
    """Write a stereo clip as ``left.yuv``, ``right.yuv``, ``disp_l2r.raw``, ``disp_r2l.raw``."""
    from pathlib import Path

    from .video_io import StereoPaths, write_disparity_sequence, write_yuv_sequence

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_yuv_sequence(out / "left.yuv", stereo.left)
    write_yuv_sequence(out / "right.yuv", stereo.right)
    write_disparity_sequence(out / "disp_l2r.raw", stereo.disparity_l2r)
    r2l = None
    if stereo.disparity_r2l is not None:
        r2l = out / "disp_r2l.raw"
        write_disparity_sequence(r2l, stereo.disparity_r2l)
    return StereoPaths(out / "left.yuv", out / "right.yuv", out / "disp_l2r.raw", r2l)
