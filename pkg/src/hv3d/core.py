"""Per-frame HV3D index: cyclopean view quality combined with depth map quality."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dct_csf import apply_csf, build_csf_mask, fuse_blocks_batch, idct2_batch
from .matching import BlockMatch, block_grid, match_frame
from .quality2d import DEFAULT_SSIM, SsimConstants, ssim_blocks, vif
from .video_io import DisparityMap, StereoSequence

log = logging.getLogger(__name__)

__all__ = [
    "DisplayGeometry",
    "MetricParams",
    "FrameScore",
    "FrameReference",
    "fovea_block_size",
    "normalize_depth",
    "depth_variance_block",
    "depth_variances",
    "variance_term_from",
    "cyclopean_quality_frame",
    "depth_quality_frame",
    "hv3d_frame",
    "prepare_reference",
    "hv3d_sequence",
]

FLAT_DEPTH_EPS = 1e-12


@dataclass(frozen=True)
class DisplayGeometry:
    viewing_distance_mm: float = 3000.0
    display_height_mm: float = 773.0
    vertical_resolution_px: int = 1080
    fovea_full_angle_deg: float = 0.88

    def __post_init__(self):
        if min(self.viewing_distance_mm, self.display_height_mm, self.vertical_resolution_px) <= 0:
            raise ValueError("display geometry values must be positive")
        if not 0.5 <= self.fovea_full_angle_deg <= 2.0:
            raise ValueError(
                f"fovea angle {self.fovea_full_angle_deg} deg outside [0.5, 2] deg"
            )


@dataclass(frozen=True)
class MetricParams:
    beta1: float = 0.4
    beta2: float = 0.1
    beta3: float = 0.29
    m: int = 16
    M: int = 64
    k: int | None = None  # None: derive from the display geometry
    fast_mode: bool = False
    disparity_sign: int = 1
    alternate_views: bool = True
    normalize_vif_depth: bool = False
    ssim: SsimConstants = DEFAULT_SSIM
    vif_sigma_nsq: float = 2.0

    def __post_init__(self):
        if min(self.beta1, self.beta2, self.beta3) < 0:
            raise ValueError("exponents must be >= 0")
        if self.m < 2:
            raise ValueError("block size must be >= 2")
        if self.M < self.m:
            raise ValueError("search range must be >= block size")
        if self.k is not None and self.k < self.m:
            raise ValueError("fovea block must be >= block size")
        if self.disparity_sign not in (1, -1):
            raise ValueError("disparity_sign must be +1 or -1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ssim"] = asdict(self.ssim)
        return d


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    q_cyclopean_mean: float
    vif_depth: float
    variance_term: float
    hv3d: float
    block_count: int
    base_view: str = "left"
    flags: tuple = field(default_factory=tuple)


def fovea_block_size(geom: DisplayGeometry, m: int = 16) -> int:
    """Side in pixels of the screen square imaged on the fovea, snapped to a multiple of m."""
    alpha = math.radians(geom.fovea_full_angle_deg / 2.0)
    k = round(2.0 * geom.viewing_distance_mm * geom.vertical_resolution_px
              * math.tan(alpha) / geom.display_height_mm)
    return max(m, int(round(k / m)) * m)


def normalize_depth(dmap) -> tuple[np.ndarray, bool]:
    """Divide by the frame maximum; returns ``(map, degenerate)``."""
    values = dmap.values if isinstance(dmap, DisparityMap) else np.asarray(dmap, dtype=np.float64)
    peak = values.max()
    if peak <= 0:
        return np.zeros_like(values, dtype=np.float64), True
    return values / peak, False


def depth_variance_block(norm_map: np.ndarray, inner_origin: tuple[int, int], m: int, k: int) -> float:
    """Sample variance of the k x k neighbourhood centred on an m x m block.

    The outer block is clipped to the frame; the divisor is the number of
    samples actually covered minus one.
    """
    norm_map = np.asarray(norm_map, dtype=np.float64)
    h, w = norm_map.shape
    x, y = inner_origin
    if x < 0 or y < 0 or x + m > w or y + m > h:
        raise ValueError(f"inner block at {inner_origin} is outside the map")
    off = (k - m) // 2
    x0, y0 = max(x - off, 0), max(y - off, 0)
    x1, y1 = min(x - off + k, w), min(y - off + k, h)
    region = norm_map[y0:y1, x0:x1]
    if region.size < 2:
        raise ValueError("outer block holds fewer than 2 samples")
    if region.min() == region.max():
        return 0.0
    return float(np.var(region, ddof=1))


def depth_variances(norm_map: np.ndarray, m: int, k: int) -> np.ndarray:
    h, w = np.shape(norm_map)
    grid = block_grid(w, h, m)
    return np.array([depth_variance_block(norm_map, o, m, k) for o in grid.origins])


def variance_term_from(variances: np.ndarray) -> tuple[float, bool]:
    """Mean of the block variances over their maximum; ``(term, flat)``."""
    peak = float(np.max(variances))
    if peak <= FLAT_DEPTH_EPS:
        return 1.0, True
    return float(np.mean(variances) / peak), False


def _gather(plane: np.ndarray, origins, m: int) -> np.ndarray:
    origins = np.asarray(origins)
    r = np.arange(m)
    rows = origins[:, 1, None, None] + r[None, :, None]
    cols = origins[:, 0, None, None] + r[None, None, :]
    return plane[rows, cols]


def _luma(frame) -> np.ndarray:
    return np.asarray(frame.luma if hasattr(frame, "luma") else frame)


def cyclopean_quality_frame(ref_pair, dist_pair, matches: list[BlockMatch],
                            params: MetricParams = MetricParams()) -> tuple[float, np.ndarray]:
    """Mean block SSIM between reference and distorted cyclopean views.

    ``ref_pair`` and ``dist_pair`` are ``(base, other)`` frames; the match
    coordinates, found on the reference pair, are reused for the distorted
    pair. Returns the mean (before the exponent) and the per-block scores.
    """
    if not matches:
        raise ValueError("no block matches")
    planes = [_luma(f) for f in (*ref_pair, *dist_pair)]
    if any(p.shape != planes[0].shape for p in planes):
        raise ValueError("all four frames must have the same size")
    m = params.m
    base_o = [mt.base_origin for mt in matches]
    other_o = [mt.match_origin for mt in matches]
    mask = build_csf_mask(m)
    views = []
    for base, other in (planes[:2], planes[2:]):
        fused = fuse_blocks_batch(_gather(base, base_o, m), _gather(other, other_o, m))
        views.append(idct2_batch(apply_csf(fused, mask)))
    scores = ssim_blocks(views[0], views[1], params.ssim)
    return float(np.mean(scores)), scores


def depth_quality_frame(ref_depth, dist_depth, params: MetricParams = MetricParams(),
                        k: int = 64, variances: np.ndarray | None = None):
    """VIF of the depth maps and the normalized local variance term.

    Returns ``(vif_depth, variance_term, flags)``.
    """
    ref_v = ref_depth.values if isinstance(ref_depth, DisparityMap) else np.asarray(ref_depth, float)
    dist_v = dist_depth.values if isinstance(dist_depth, DisparityMap) else np.asarray(dist_depth, float)
    if ref_v.shape != dist_v.shape:
        raise ValueError(f"depth maps differ in size: {ref_v.shape} vs {dist_v.shape}")
    flags = []
    norm_ref, degenerate = normalize_depth(ref_v)
    if degenerate:
        flags.append("depth_degenerate")
    if params.normalize_vif_depth:
        v = vif(norm_ref, normalize_depth(dist_v)[0], params.vif_sigma_nsq)
    else:
        v = vif(ref_v, dist_v, params.vif_sigma_nsq)
    if variances is None:
        variances = depth_variances(norm_ref, params.m, k)
    term, flat = variance_term_from(variances)
    if flat:
        flags.append("depth_flat")
    return v, term, tuple(flags)


def hv3d_frame(q_cyclopean_mean: float, vif_depth: float, variance_term: float,
               params: MetricParams = MetricParams()) -> float:
    q = max(q_cyclopean_mean, 0.0)
    v = max(vif_depth, 0.0)
    return q ** params.beta1 * v ** params.beta2 * variance_term ** params.beta3


@dataclass(frozen=True)
class FrameReference:
    """Reference-side analysis of one frame, reusable across distortions."""

    base_view: str
    depth_source: str
    matches: tuple
    variances: np.ndarray
    flags: tuple = ()


def _frame_setup(ref: StereoSequence, i: int, params: MetricParams):
    use_right = params.alternate_views and i % 2 == 1 and ref.disparity_r2l is not None
    if use_right:
        return "right", -params.disparity_sign, "r2l"
    return "left", params.disparity_sign, ref.depth_source if not params.alternate_views else "l2r"


def _views(seq: StereoSequence, i: int, base_view: str):
    if base_view == "left":
        return seq.left[i], seq.right[i]
    return seq.right[i], seq.left[i]


def _depth(seq: StereoSequence, i: int, source: str):
    maps = seq.disparity_l2r if source == "l2r" else seq.disparity_r2l
    if maps is None:
        raise ValueError(f"distorted sequence lacks {source} disparity maps")
    return maps[i]


def _resolve_k(geom: DisplayGeometry, params: MetricParams) -> int:
    return params.k if params.k is not None else fovea_block_size(geom, params.m)


def _map(fn, items, threads: int, timings: list | None = None):
    if timings is not None:
        inner = fn

        def fn(x):
            t0 = time.perf_counter()
            out = inner(x)
            return out, time.perf_counter() - t0

    if threads <= 1:
        results = [fn(x) for x in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, items))
    if timings is None:
        return results
    timings[:] = [t for _, t in results]
    return [r for r, _ in results]


def prepare_reference(ref: StereoSequence, geom: DisplayGeometry = DisplayGeometry(),
                      params: MetricParams = MetricParams(), threads: int = 1,
                      timings: list | None = None) -> list[FrameReference]:
    """Block matches and depth variances of every reference frame.

    When ``timings`` is a list it receives the wall-clock seconds per frame.
    """
    k = _resolve_k(geom, params)
    fallback = params.alternate_views and ref.disparity_r2l is None and len(ref) > 1
    if fallback:
        log.warning("no right-to-left disparity maps: using the left view as base for all frames")

    def one(i):
        base_view, sign, source = _frame_setup(ref, i, params)
        base, other = _views(ref, i, base_view)
        base_disp = ref.disparity_l2r[i] if base_view == "left" else ref.disparity_r2l[i]
        matches = match_frame(base, other, base_disp, params.m, params.M, sign, params.fast_mode)
        norm, _ = normalize_depth(_depth(ref, i, source))
        flags = ("view_alternation_fallback",) if fallback and i % 2 == 1 else ()
        return FrameReference(base_view, source, tuple(matches),
                              depth_variances(norm, params.m, k), flags)

    return _map(one, range(len(ref)), threads, timings)


def hv3d_sequence(ref: StereoSequence, dist: StereoSequence,
                  geom: DisplayGeometry = DisplayGeometry(),
                  params: MetricParams = MetricParams(),
                  reference: list[FrameReference] | None = None,
                  threads: int = 1, timings: list | None = None) -> list[FrameScore]:
    """Score a distorted stereo sequence against its reference, frame by frame.

    Even frames use the left view and left-to-right disparity as base; odd
    frames switch to the right view and right-to-left disparity when those
    maps exist and ``params.alternate_views`` is set. ``timings``, when a
    list, receives per-frame seconds including the reference analysis.
    """
    if len(ref) != len(dist):
        raise ValueError(f"reference has {len(ref)} frames, distorted has {len(dist)}")
    if (ref.width, ref.height) != (dist.width, dist.height):
        raise ValueError("reference and distorted frames differ in size")
    k = _resolve_k(geom, params)
    ref_times: list = []
    if reference is None:
        reference = prepare_reference(ref, geom, params, threads,
                                      ref_times if timings is not None else None)

    def one(i):
        fr = reference[i]
        source = fr.depth_source
        q, _ = cyclopean_quality_frame(_views(ref, i, fr.base_view),
                                       _views(dist, i, fr.base_view),
                                       list(fr.matches), params)
        v, term, dflags = depth_quality_frame(_depth(ref, i, source), _depth(dist, i, source),
                                              params, k, fr.variances)
        flags = list(fr.flags) + list(dflags)
        if q < 0:
            flags.append("ssim_floored")
        score = hv3d_frame(q, v, term, params)
        return FrameScore(i, q, v, term, score, len(fr.matches), fr.base_view, tuple(flags))

    scores = _map(one, range(len(ref)), threads, timings)
    if timings is not None and ref_times:
        timings[:] = [a + b for a, b in zip(timings, ref_times)]
    return scores
