"""Seeded, reproducible distortions: additive Gaussian noise, Gaussian blur, brightness shift.

Codec-based distortions (HEVC simulcast, 3D-HEVC, depth compression with
view synthesis) need external reference software and are not generated
here; their decoded outputs can be scored directly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .video_io import (
    DisparityMap,
    StereoSequence,
    VideoSequence,
    write_disparity_sequence,
    write_yuv_sequence,
)

log = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "OUT_OF_SCOPE_KINDS",
    "UnsupportedDistortion",
    "DistortionSpec",
    "gaussian_kernel",
    "add_gaussian_noise",
    "gaussian_blur",
    "brightness_shift",
    "apply_distortion",
    "distort_stereo",
    "write_distorted",
]

KINDS = ("gaussian_noise", "gaussian_blur", "brightness_shift")
OUT_OF_SCOPE_KINDS = ("hevc", "hevc_simulcast", "3d_hevc", "depth_compression",
                      "view_synthesis", "jpeg")


class UnsupportedDistortion(ValueError):
    pass


def _round8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def _frame_rng(seed: int, view: int, frame: int) -> np.random.Generator:
    # counter-based stream keyed by (seed ^ view, frame)
    ss = np.random.SeedSequence([(seed ^ view) & 0xFFFFFFFFFFFFFFFF, frame])
    return np.random.Generator(np.random.Philox(ss))


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps; even sizes are promoted to the next odd size."""
    if size < 1:
        raise ValueError("kernel size must be >= 1")
    if size % 2 == 0:
        log.info("blur kernel size %d promoted to %d taps", size, size + 1)
        size += 1
    if sigma <= 0 or size == 1:
        k = np.zeros(size)
        k[size // 2] = 1.0
        return k
    x = np.arange(size) - size // 2
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _plane_noise(plane, variance, rng):
    noise = rng.standard_normal(plane.shape) * np.sqrt(variance) * 255.0
    return _round8(plane.astype(np.float64) + noise)


def _plane_blur(plane, size, sigma):
    k = gaussian_kernel(size, sigma)
    out = ndimage.correlate1d(plane.astype(np.float64), k, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, k, axis=1, mode="nearest")
    return _round8(out)


def _plane_shift(plane, delta):
    return np.clip(plane.astype(np.int16) + int(delta), 0, 255).astype(np.uint8)


def add_gaussian_noise(seq: VideoSequence, variance: float, seed: int = 0,
                       view: int = 0) -> VideoSequence:
    """Add zero-mean white noise of ``variance`` (in [0, 1]^2 intensity units)."""
    if variance < 0:
        raise ValueError("noise variance must be >= 0")
    if variance == 0:
        return seq
    frames = [_plane_noise(f.luma, variance, _frame_rng(seed, view, i)) for i, f in enumerate(seq)]
    return VideoSequence.from_array(np.stack(frames), seq.frame_rate)


def gaussian_blur(seq: VideoSequence, size: int = 5, sigma: float = 4.0) -> VideoSequence:
    """Separable Gaussian low-pass with edge replication."""
    frames = [_plane_blur(f.luma, size, sigma) for f in seq]
    return VideoSequence.from_array(np.stack(frames), seq.frame_rate)


def brightness_shift(seq: VideoSequence, delta: int = 20) -> VideoSequence:
    frames = [_plane_shift(f.luma, delta) for f in seq]
    return VideoSequence.from_array(np.stack(frames), seq.frame_rate)


@dataclass(frozen=True)
class DistortionSpec:
    """One distortion and its severity.

    ``severity`` is the noise variance, the blur sigma or the brightness
    delta depending on ``kind``. With ``temporal_mode="per_frame_random"``
    each frame draws its severity uniformly from ``severity_range``.
    """

    kind: str
    severity: float
    kernel_size: int = 5
    temporal_mode: str = "constant"
    severity_range: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            if self.kind.lower() in OUT_OF_SCOPE_KINDS:
                raise UnsupportedDistortion(
                    f"distortion {self.kind!r} is not generated by this toolkit; "
                    f"codec/synthesis distortions ({', '.join(OUT_OF_SCOPE_KINDS)}) need "
                    "external reference software - score their decoded output instead"
                )
            raise UnsupportedDistortion(
                f"unknown distortion {self.kind!r}; supported: {', '.join(KINDS)}"
            )
        if self.temporal_mode not in ("constant", "per_frame_random"):
            raise ValueError(f"unknown temporal mode {self.temporal_mode!r}")
        if self.temporal_mode == "per_frame_random" and self.severity_range is None:
            raise ValueError("per_frame_random needs severity_range")
        if self.kind == "gaussian_noise" and self.severity < 0:
            raise ValueError("noise variance must be >= 0")
        if self.kind == "brightness_shift" and self.severity != int(self.severity):
            raise ValueError("brightness delta must be an integer")
        size = self.kernel_size + (1 - self.kernel_size % 2)
        object.__setattr__(self, "kernel_size", size)
        if self.severity_range is not None:
            object.__setattr__(self, "severity_range", tuple(self.severity_range))

    def frame_severities(self, n: int) -> np.ndarray:
        if self.temporal_mode == "constant":
            return np.full(n, float(self.severity))
        lo, hi = self.severity_range
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, 0xD157])))
        sev = rng.uniform(lo, hi, n)
        if self.kind == "brightness_shift":
            sev = np.floor(sev + 0.5)
        return sev

    def to_dict(self) -> dict:
        return asdict(self)


def _apply_plane(plane, spec: DistortionSpec, severity: float, view: int, frame: int):
    if spec.kind == "gaussian_noise":
        if severity == 0:
            return np.asarray(plane, np.uint8)
        return _plane_noise(plane, severity, _frame_rng(spec.seed, view, frame))
    if spec.kind == "gaussian_blur":
        return _plane_blur(plane, spec.kernel_size, severity)
    return _plane_shift(plane, severity)


def apply_distortion(seq: VideoSequence, spec: DistortionSpec, view: int = 0) -> VideoSequence:
    sev = spec.frame_severities(len(seq))
    frames = [_apply_plane(f.luma, spec, s, view, i) for i, (f, s) in enumerate(zip(seq, sev))]
    return VideoSequence.from_array(np.stack(frames), seq.frame_rate)


def _distort_maps(maps, spec: DistortionSpec, view: int):
    if maps is None:
        return None
    sev = spec.frame_severities(len(maps))
    out = []
    for i, (d, s) in enumerate(zip(maps, sev)):
        plane = np.clip(d.stored, 0, 255).astype(np.uint8)
        out.append(DisparityMap(_apply_plane(plane, spec, s, view, i), d.scale))
    return tuple(out)


def distort_stereo(stereo: StereoSequence, spec: DistortionSpec,
                   distort_depth: bool = True) -> StereoSequence:
    """Distort both views with per-view seeds (``seed ^ view``).

    Noise and blur are also applied directly to the disparity maps (views 2
    and 3 seed them); a brightness shift leaves the maps untouched.
    """
    left = apply_distortion(stereo.left, spec, 0)
    right = apply_distortion(stereo.right, spec, 1)
    l2r, r2l = stereo.disparity_l2r, stereo.disparity_r2l
    if distort_depth and spec.kind != "brightness_shift":
        l2r = _distort_maps(l2r, spec, 2)
        r2l = _distort_maps(r2l, spec, 3)
    return replace(stereo, left=left, right=right, disparity_l2r=l2r, disparity_r2l=r2l)


def write_distorted(out_dir, stereo: StereoSequence, spec: DistortionSpec,
                    sources: dict | None = None) -> Path:
    """Write views (YUV420p, zero chroma), disparity planes and a JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_yuv_sequence(out / "left.yuv", stereo.left)
    write_yuv_sequence(out / "right.yuv", stereo.right)
    write_disparity_sequence(out / "disp_l2r.raw", stereo.disparity_l2r)
    if stereo.disparity_r2l is not None:
        write_disparity_sequence(out / "disp_r2l.raw", stereo.disparity_r2l)
    sidecar = {
        "spec": spec.to_dict(),
        "view_seeds": {"left": spec.seed ^ 0, "right": spec.seed ^ 1,
                       "disp_l2r": spec.seed ^ 2, "disp_r2l": spec.seed ^ 3},
        "frame_severities": spec.frame_severities(len(stereo)).tolist(),
        "width": stereo.width,
        "height": stereo.height,
        "frames": len(stereo),
        "sources": {k: str(v) for k, v in (sources or {}).items()},
    }
    path = out / "distortion.json"
    path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path
