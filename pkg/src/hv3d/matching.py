"""Block correspondence between the two views of a stereo frame.

Each m x m block of the base view is seeded with the median disparity of
its pixels, then refined by exhaustive MSE search in an M x M window around
the seed. The fast variant uses the seed directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "BlockGrid",
    "BlockMatch",
    "block_grid",
    "block_disparity",
    "seed_position",
    "find_best_match",
    "fast_match",
    "match_frame",
]


@dataclass(frozen=True)
class BlockGrid:
    m: int
    cols: int
    rows: int

    @property
    def origins(self) -> list[tuple[int, int]]:
        """Top-left ``(x, y)`` of every complete block, row-major."""
        return [(c * self.m, r * self.m) for r in range(self.rows) for c in range(self.cols)]

    def __len__(self):
        return self.cols * self.rows


@dataclass(frozen=True)
class BlockMatch:
    base_origin: tuple[int, int]
    match_origin: tuple[int, int]
    seed_disparity: float
    mse_at_match: float = math.nan  # NaN when not computed (fast mode)


def block_grid(width: int, height: int, m: int) -> BlockGrid:
    if m < 2:
        raise ValueError("block side must be >= 2")
    cols, rows = width // m, height // m
    if cols == 0 or rows == 0:
        raise ValueError(f"frame {width}x{height} is smaller than one {m}x{m} block")
    return BlockGrid(m, cols, rows)


def _plane(obj) -> np.ndarray:
    for attr in ("values", "luma"):
        if hasattr(obj, attr):
            return np.asarray(getattr(obj, attr))
    return np.asarray(obj)


def block_disparity(dmap, origin: tuple[int, int], m: int) -> float:
    """Median disparity of the m x m block at ``origin`` (x, y).

    For an even number of samples the lower of the two middle values is
    returned, so the result is always one of the block's own values.
    """
    values = _plane(dmap)
    x, y = origin
    if x < 0 or y < 0 or x + m > values.shape[1] or y + m > values.shape[0]:
        raise ValueError(f"block at {origin} of side {m} is outside the {values.shape} map")
    block = np.sort(values[y:y + m, x:x + m], axis=None)
    return float(block[(block.size - 1) // 2])


def _round_half_up(d: float) -> int:
    return int(math.floor(d + 0.5))


def seed_position(base_origin: tuple[int, int], d: float, sign: int = 1,
                  frame_size: tuple[int, int] | None = None, m: int = 0) -> tuple[int, int]:
    """Approximate match origin: same row, column shifted by the disparity.

    ``frame_size`` is ``(width, height)``; when given the block is clamped to
    stay inside the frame.
    """
    x, y = base_origin
    col = x - sign * _round_half_up(d)
    if frame_size is not None:
        col = min(max(col, 0), frame_size[0] - m)
    return (col, y)


def _window_bounds(seed, half, m, width, height):
    sx, sy = seed
    x0, x1 = max(sx - half, 0), min(sx + half, width - m)
    y0, y1 = max(sy - half, 0), min(sy + half, height - m)
    return x0, x1, y0, y1


def _ssd_map(block: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Exact integer SSD of ``block`` against every placement inside ``region``."""
    m = block.shape[0]
    b = block.astype(np.float64)
    r = region.astype(np.float64)
    # sums fit comfortably in float64's exact integer range
    corr = fftconvolve(r, b[::-1, ::-1], mode="valid")
    sq = np.cumsum(np.cumsum(np.pad(r * r, ((1, 0), (1, 0))), axis=0), axis=1)
    win = sq[m:, m:] - sq[:-m, m:] - sq[m:, :-m] + sq[:-m, :-m]
    ssd = float(np.sum(b * b)) + win - 2.0 * corr
    return np.rint(ssd).astype(np.int64)


def find_best_match(base_frame, other_frame, base_origin: tuple[int, int],
                    seed: tuple[int, int], M: int, m: int,
                    seed_disparity: float = math.nan) -> BlockMatch:
    """Exhaustive MSE search around ``seed``.

    Candidate origins lie within +/- M/2 of the seed on both axes, clamped
    to the frame. Ties go to the smallest Euclidean offset from the seed,
    then to row-major order.
    """
    base = _plane(base_frame)
    other = _plane(other_frame)
    if base.shape != other.shape:
        raise ValueError("base and other frames differ in size")
    height, width = base.shape
    if width < m or height < m:
        raise ValueError(f"frame {width}x{height} is smaller than the {m}x{m} block")
    bx, by = base_origin
    block = base[by:by + m, bx:bx + m]
    if block.shape != (m, m):
        raise ValueError(f"base block at {base_origin} is outside the frame")
    seed = (min(max(seed[0], 0), width - m), min(max(seed[1], 0), height - m))
    x0, x1, y0, y1 = _window_bounds(seed, M // 2, m, width, height)
    region = other[y0:y1 + m, x0:x1 + m]
    ssd = _ssd_map(block, region)
    best = ssd.min()
    ys, xs = np.nonzero(ssd == best)
    if len(ys) > 1:
        dy = ys + y0 - seed[1]
        dx = xs + x0 - seed[0]
        order = np.lexsort((xs, ys, dx * dx + dy * dy))
        ys, xs = ys[order], xs[order]
    match = (int(xs[0] + x0), int(ys[0] + y0))
    return BlockMatch(tuple(base_origin), match, seed_disparity, float(best) / (m * m))


def fast_match(base_origin: tuple[int, int], d: float, sign: int = 1,
               frame_size: tuple[int, int] | None = None, m: int = 0) -> BlockMatch:
    """Disparity-seeded match without refinement; ``mse_at_match`` is NaN."""
    pos = seed_position(base_origin, d, sign, frame_size, m)
    return BlockMatch(tuple(base_origin), pos, float(d))


def match_frame(base_frame, other_frame, base_disparity, m: int, M: int,
                sign: int = 1, fast: bool = False) -> list[BlockMatch]:
    """Match every block of the base view's grid against the other view."""
    base = _plane(base_frame)
    height, width = base.shape
    grid = block_grid(width, height, m)
    dvals = _plane(base_disparity)
    matches = []
    for origin in grid.origins:
        d = block_disparity(dvals, origin, m)
        if fast:
            matches.append(fast_match(origin, d, sign, (width, height), m))
        else:
            seed = seed_position(origin, d, sign, (width, height), m)
            matches.append(find_best_match(base, other_frame, origin, seed, M, m, d))
    return matches
