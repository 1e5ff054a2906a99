"""Raw video, disparity map and dataset manifest loading.

Only the luma plane of 8-bit YUV420p files is ingested. Disparity maps are
8-bit planes (headerless raw or binary PGM) carried together with a scale
factor that converts stored units to pixels.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "VideoIOError",
    "TruncatedFileError",
    "ManifestError",
    "Frame",
    "VideoSequence",
    "DisparityMap",
    "StereoSequence",
    "StereoPaths",
    "ManifestEntry",
    "DatasetManifest",
    "yuv420_frame_bytes",
    "load_yuv_sequence",
    "write_yuv_sequence",
    "load_disparity_map",
    "load_disparity_sequence",
    "write_disparity_sequence",
    "write_pgm",
    "load_stereo_sequence",
    "load_dataset_manifest",
]


class VideoIOError(ValueError):
    """Raised for malformed or inconsistent input files."""


class TruncatedFileError(VideoIOError):
    def __init__(self, path, expected: int, actual: int):
        self.path = str(path)
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{self.path}: expected a multiple of {expected} bytes, got {actual}"
        )


class ManifestError(VideoIOError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Frame:
    """One 8-bit luma plane, shape ``(height, width)``."""

    luma: np.ndarray

    def __post_init__(self):
        luma = np.asarray(self.luma)
        if luma.ndim != 2 or luma.shape[0] <= 0 or luma.shape[1] <= 0:
            raise VideoIOError(f"luma plane must be a non-empty 2-D array, got {luma.shape}")
        if luma.dtype != np.uint8:
            if not np.issubdtype(luma.dtype, np.integer) or luma.min() < 0 or luma.max() > 255:
                raise VideoIOError("luma samples must be integers in [0, 255]")
            luma = luma.astype(np.uint8)
        object.__setattr__(self, "luma", _frozen(luma))

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.luma, other.luma)


@dataclass(frozen=True, eq=False)
class VideoSequence:
    frames: tuple
    frame_rate: float = 25.0

    def __post_init__(self):
        frames = tuple(f if isinstance(f, Frame) else Frame(f) for f in self.frames)
        if not frames:
            raise VideoIOError("a video sequence needs at least one frame")
        shape = frames[0].luma.shape
        for i, f in enumerate(frames):
            if f.luma.shape != shape:
                raise VideoIOError(f"frame {i} has shape {f.luma.shape}, expected {shape}")
        if self.frame_rate <= 0:
            raise VideoIOError("frame rate must be positive")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_array(cls, planes: np.ndarray, frame_rate: float = 25.0) -> "VideoSequence":
        """Build a sequence from a ``(frames, height, width)`` uint8 array."""
        return cls(tuple(Frame(p) for p in np.asarray(planes)), frame_rate)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)

    def to_array(self) -> np.ndarray:
        return np.stack([f.luma for f in self.frames])

    def __eq__(self, other):
        return (
            isinstance(other, VideoSequence)
            and self.frame_rate == other.frame_rate
            and len(self) == len(other)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel horizontal disparity; ``values = stored * scale`` pixels."""

    stored: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        stored = np.asarray(self.stored)
        if stored.ndim != 2:
            raise VideoIOError("disparity map must be 2-D")
        if not np.issubdtype(stored.dtype, np.integer):
            raise VideoIOError("disparity maps are stored as integers; use the scale factor")
        if not self.scale > 0:
            raise VideoIOError("disparity scale factor must be > 0")
        object.__setattr__(self, "stored", _frozen(stored))

    @property
    def width(self) -> int:
        return self.stored.shape[1]

    @property
    def height(self) -> int:
        return self.stored.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self.stored.astype(np.float64) * self.scale


@dataclass(frozen=True)
class StereoSequence:
    left: VideoSequence
    right: VideoSequence
    disparity_l2r: tuple
    disparity_r2l: tuple | None = None
    depth_source: str = "l2r"

    def __post_init__(self):
        if len(self.left) != len(self.right):
            raise VideoIOError(
                f"left has {len(self.left)} frames, right has {len(self.right)}"
            )
        if (self.left.width, self.left.height) != (self.right.width, self.right.height):
            raise VideoIOError("left and right views differ in size")
        object.__setattr__(self, "disparity_l2r", tuple(self.disparity_l2r))
        if self.disparity_r2l is not None:
            object.__setattr__(self, "disparity_r2l", tuple(self.disparity_r2l))
        if self.depth_source not in ("l2r", "r2l"):
            raise VideoIOError("depth_source must be 'l2r' or 'r2l'")
        if self.depth_source == "r2l" and self.disparity_r2l is None:
            raise VideoIOError("depth_source 'r2l' needs right-to-left maps")
        for name in ("disparity_l2r", "disparity_r2l"):
            maps = getattr(self, name)
            if maps is None:
                continue
            if len(maps) != len(self.left):
                raise VideoIOError(
                    f"{name} has {len(maps)} maps for {len(self.left)} frames"
                )
            for d in maps:
                if (d.width, d.height) != (self.left.width, self.left.height):
                    raise VideoIOError(f"{name} map size does not match the frames")

    def __len__(self):
        return len(self.left)

    @property
    def width(self) -> int:
        return self.left.width

    @property
    def height(self) -> int:
        return self.left.height


# --- YUV ---------------------------------------------------------------------


def yuv420_frame_bytes(width: int, height: int) -> int:
    return width * height * 3 // 2


def _check_even(width: int, height: int):
    if width <= 0 or height <= 0:
        raise VideoIOError(f"invalid dimensions {width}x{height}")
    if width % 2 or height % 2:
        raise VideoIOError(f"YUV420p needs even dimensions, got {width}x{height}")


def load_yuv_sequence(path, width: int, height: int, frame_count_limit: int | None = None,
                      frame_rate: float = 25.0) -> VideoSequence:
    """Read the luma planes of an 8-bit planar YUV420 file.

    Raises
    ------
    TruncatedFileError
        If the file size is not a whole number of frames.
    """
    _check_even(width, height)
    frame_bytes = yuv420_frame_bytes(width, height)
    size = os.path.getsize(path)
    if size == 0 or size % frame_bytes:
        expected = max(1, -(-size // frame_bytes)) * frame_bytes
        raise TruncatedFileError(path, expected, size)
    count = size // frame_bytes
    if frame_count_limit is not None:
        count = min(count, frame_count_limit)
    raw = np.fromfile(path, dtype=np.uint8, count=count * frame_bytes)
    raw = raw.reshape(count, frame_bytes)
    luma = raw[:, : width * height].reshape(count, height, width)
    return VideoSequence.from_array(luma, frame_rate)


def _atomic_write(path, data: bytes):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_yuv_sequence(path, seq: VideoSequence):
    """Write luma planes as YUV420p with zero-filled chroma."""
    _check_even(seq.width, seq.height)
    chroma = bytes(seq.width * seq.height // 2)
    parts = []
    for f in seq:
        parts.append(f.luma.tobytes())
        parts.append(chroma)
    _atomic_write(path, b"".join(parts))


# --- disparity ----------------------------------------------------------------


def _read_pgm(data: bytes, path):
    tokens = []
    pos = 0
    if not data.startswith(b"P5"):
        raise VideoIOError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise VideoIOError(f"{path}: malformed PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError:
            raise VideoIOError(f"{path}: malformed PGM header") from None
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = tokens
    if maxval > 255:
        raise VideoIOError(f"{path}: PGM maxval {maxval} not supported (8-bit only)")
    if maxval <= 0 or width <= 0 or height <= 0:
        raise VideoIOError(f"{path}: malformed PGM header")
    body = data[pos:]
    if len(body) < width * height:
        raise TruncatedFileError(path, pos + width * height, len(data))
    return width, height, np.frombuffer(body, dtype=np.uint8, count=width * height)


def load_disparity_map(path, width: int, height: int, scale: float = 1.0) -> DisparityMap:
    """Load one 8-bit disparity plane from a raw file or a P5 PGM."""
    data = Path(path).read_bytes()
    if data.startswith(b"P5"):
        w, h, samples = _read_pgm(data, path)
        if (w, h) != (width, height):
            raise VideoIOError(f"{path}: PGM is {w}x{h}, expected {width}x{height}")
    else:
        if len(data) != width * height:
            raise VideoIOError(
                f"{path}: expected {width * height} bytes for {width}x{height}, got {len(data)}"
            )
        samples = np.frombuffer(data, dtype=np.uint8)
    return DisparityMap(samples.reshape(height, width).copy(), scale)


def load_disparity_sequence(path, width: int, height: int, scale: float = 1.0,
                            frame_count_limit: int | None = None) -> tuple:
    """Load per-frame disparity maps.

    ``path`` may be a directory of PGM/raw files (sorted by name), a ``.yuv``
    file whose luma planes carry the disparity, or a headerless file of
    concatenated 8-bit planes.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"disparity input not found: {path}")
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file())
        if frame_count_limit is not None:
            files = files[:frame_count_limit]
        return tuple(load_disparity_map(p, width, height, scale) for p in files)
    if path.suffix.lower() == ".pgm":
        return (load_disparity_map(path, width, height, scale),)
    if path.suffix.lower() == ".yuv":
        seq = load_yuv_sequence(path, width, height, frame_count_limit)
        return tuple(DisparityMap(f.luma.copy(), scale) for f in seq)
    plane = width * height
    size = path.stat().st_size
    if size == 0 or size % plane:
        raise TruncatedFileError(path, max(1, -(-size // plane)) * plane, size)
    count = size // plane
    if frame_count_limit is not None:
        count = min(count, frame_count_limit)
    raw = np.fromfile(path, dtype=np.uint8, count=count * plane).reshape(count, height, width)
    return tuple(DisparityMap(p.copy(), scale) for p in raw)


def write_disparity_sequence(path, maps: Sequence[DisparityMap]):
    """Write stored disparity planes as concatenated raw 8-bit data."""
    parts = []
    for d in maps:
        if d.stored.min(initial=0) < 0 or d.stored.max(initial=0) > 255:
            raise VideoIOError("only 8-bit disparity maps can be written")
        parts.append(d.stored.astype(np.uint8).tobytes())
    _atomic_write(path, b"".join(parts))


def write_pgm(path, plane: np.ndarray):
    plane = np.asarray(plane, dtype=np.uint8)
    header = f"P5\n{plane.shape[1]} {plane.shape[0]}\n255\n".encode()
    _atomic_write(path, header + plane.tobytes())


# --- stereo + manifest ---------------------------------------------------------


@dataclass(frozen=True)
class StereoPaths:
    left: Path
    right: Path
    disp_l2r: Path
    disp_r2l: Path | None = None


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    reference: StereoPaths
    distorted: StereoPaths
    distortion: str
    width: int
    height: int
    fps: float = 25.0
    mos: float | None = None
    disp_scale: float = 1.0


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple = field(default_factory=tuple)
    path: Path | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def load_stereo_sequence(paths: StereoPaths, width: int, height: int, fps: float = 25.0,
                         disp_scale: float = 1.0, frame_count_limit: int | None = None,
                         depth_source: str = "l2r") -> StereoSequence:
    for p in (paths.left, paths.right, paths.disp_l2r, paths.disp_r2l):
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input not found: {p}")
    left = load_yuv_sequence(paths.left, width, height, frame_count_limit, fps)
    right = load_yuv_sequence(paths.right, width, height, frame_count_limit, fps)
    l2r = load_disparity_sequence(paths.disp_l2r, width, height, disp_scale, frame_count_limit)
    r2l = None
    if paths.disp_r2l is not None:
        r2l = load_disparity_sequence(paths.disp_r2l, width, height, disp_scale,
                                      frame_count_limit)
    return StereoSequence(left, right, l2r, r2l, depth_source)


def _stereo_paths(obj, base: Path, where: str) -> StereoPaths:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object with left/right/disp_l2r")
    try:
        left, right, l2r = obj["left"], obj["right"], obj["disp_l2r"]
    except KeyError as exc:
        raise ManifestError(f"{where}: missing field {exc.args[0]!r}") from None
    r2l = obj.get("disp_r2l")
    resolved = [base / p if p is not None else None for p in (left, right, l2r, r2l)]
    for p in resolved:
        if p is not None and not p.exists():
            raise ManifestError(f"{where}: referenced file does not exist: {p}")
    return StereoPaths(*resolved)


def _check_video_size(path: Path, width: int, height: int, where: str):
    try:
        _check_even(width, height)
    except VideoIOError as exc:
        raise ManifestError(f"{where}: {exc}") from None
    size = path.stat().st_size
    frame_bytes = yuv420_frame_bytes(width, height)
    if size == 0 or size % frame_bytes:
        raise ManifestError(
            f"{where}: {path} is {size} bytes, not a whole number of {frame_bytes}-byte frames"
        )


def load_dataset_manifest(path) -> DatasetManifest:
    """Parse and validate a JSON dataset manifest.

    The document is either a list of entries or an object with an
    ``entries`` list; top-level ``width``/``height``/``fps``/``disp_scale``
    act as defaults for entries that omit them. Paths resolve relative to
    the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    defaults = {}
    if isinstance(doc, dict):
        defaults = {k: doc[k] for k in ("width", "height", "fps", "disp_scale") if k in doc}
        raw_entries = doc.get("entries")
    else:
        raw_entries = doc
    if not isinstance(raw_entries, list):
        raise ManifestError(f"{path}: no entries list")
    base = path.parent
    seen = set()
    entries = []
    for n, raw in enumerate(raw_entries):
        where = f"{path.name} entry {n}"
        if not isinstance(raw, dict):
            raise ManifestError(f"{where}: expected an object")
        merged = {**defaults, **raw}
        for key in ("id", "ref", "dist", "distortion", "width", "height"):
            if key not in merged:
                raise ManifestError(f"{where}: missing field {key!r}")
        entry_id = str(merged["id"])
        if entry_id in seen:
            raise ManifestError(f"{where}: duplicate entry id {entry_id!r}")
        seen.add(entry_id)
        mos = merged.get("mos")
        if mos is not None:
            mos = float(mos)
            if not 0.0 <= mos <= 10.0:
                raise ManifestError(f"{where}: mos {mos} outside [0, 10]")
        width, height = int(merged["width"]), int(merged["height"])
        ref = _stereo_paths(merged["ref"], base, f"{where} ref")
        dist = _stereo_paths(merged["dist"], base, f"{where} dist")
        for p in (ref.left, ref.right, dist.left, dist.right):
            _check_video_size(p, width, height, where)
        disp_scale = float(merged.get("disp_scale", 1.0))
        if disp_scale <= 0:
            raise ManifestError(f"{where}: disp_scale must be > 0")
        entries.append(ManifestEntry(
            id=entry_id,
            reference=ref,
            distorted=dist,
            distortion=str(merged["distortion"]),
            width=width,
            height=height,
            fps=float(merged.get("fps", 25.0)),
            mos=mos,
            disp_scale=disp_scale,
        ))
    return DatasetManifest(tuple(entries), path)


def write_dataset_manifest(path, entries: Iterable[dict], **defaults):
    doc = dict(defaults)
    doc["entries"] = list(entries)
    Path(path).write_text(json.dumps(doc, indent=2))
