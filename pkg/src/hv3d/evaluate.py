"""Dataset-level scoring, 2-D baselines, statistics reports and timing."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import DisplayGeometry, FrameScore, MetricParams, hv3d_sequence, prepare_reference
from .pooling import (
    ComponentRecord,
    OUTLIER_RULE,
    PoolingParams,
    correlation_stats,
    logistic,
    minkowski_pool,
)
from .quality2d import psnr, ssim_image, vif
from .video_io import StereoSequence

__all__ = [
    "BASELINES",
    "FRAME_COLUMNS",
    "COMPONENT_COLUMNS",
    "EntryResult",
    "score_pair",
    "baseline_frame_scores",
    "frame_rows_csv",
    "statistics_block",
    "per_distortion_block",
    "curve_samples",
    "write_components_csv",
    "read_components_csv",
    "time_metrics",
]

BASELINES = {
    "psnr": lambda a, b: psnr(a, b),
    "ssim": lambda a, b: ssim_image(a, b),
    "vif": lambda a, b: vif(a, b),
}

FRAME_COLUMNS = ("frame_index", "base_view", "q_cyclopean_mean", "vif_depth",
                 "variance_term", "hv3d", "block_count", "flags")
COMPONENT_COLUMNS = ("id", "distortion", "frame_index", "q_cyclopean_mean", "vif_depth",
                     "variance_term", "mos")


@dataclass
class EntryResult:
    id: str
    distortion: str
    mos: float | None
    frames: list
    pooled: dict = field(default_factory=dict)  # metric name -> sequence score
    timings: list = field(default_factory=list)


def score_pair(ref: StereoSequence, dist: StereoSequence, geom: DisplayGeometry,
               params: MetricParams, pooling: PoolingParams, threads: int = 1):
    """Per-frame HV3D scores, the pooled score and per-frame wall-clock seconds."""
    timings: list = []
    frames = hv3d_sequence(ref, dist, geom, params, threads=threads, timings=timings)
    pooled = minkowski_pool([f.hv3d for f in frames], pooling)
    return frames, pooled, timings


def baseline_frame_scores(ref: StereoSequence, dist: StereoSequence,
                          metrics: Iterable[str]) -> dict:
    """Per-frame 2-D metric averaged over the left and right views."""
    out = {}
    for name in metrics:
        fn = BASELINES[name]
        per_frame = []
        for i in range(len(ref)):
            left = fn(ref.left[i].luma, dist.left[i].luma)
            right = fn(ref.right[i].luma, dist.right[i].luma)
            per_frame.append((left + right) / 2.0)
        out[name] = np.array(per_frame)
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def frame_rows_csv(frames: Sequence[FrameScore]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_COLUMNS)
    for f in frames:
        w.writerow([f.frame_index, f.base_view, _fmt(f.q_cyclopean_mean), _fmt(f.vif_depth),
                    _fmt(f.variance_term), _fmt(f.hv3d), f.block_count, ";".join(f.flags)])
    return buf.getvalue()


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def statistics_block(results: Sequence[EntryResult], metrics: Sequence[str]) -> dict:
    """Correlation statistics of each metric's pooled score against MOS."""
    rated = [r for r in results if r.mos is not None]
    if len(rated) < 3:
        return {"skipped": f"statistics need >= 3 entries with MOS, found {len(rated)}"}
    mos = [r.mos for r in rated]
    block = {"n": len(rated), "outlier_rule": OUTLIER_RULE, "metrics": {}}
    for name in metrics:
        fit = correlation_stats([r.pooled[name] for r in rated], mos)
        block["metrics"][name] = {
            "pcc": _clean(fit.pcc), "scc": _clean(fit.scc), "rmse": _clean(fit.rmse),
            "outlier_ratio": _clean(fit.outlier_ratio),
            "logistic": {"a": _clean(fit.a), "b": _clean(fit.b), "c": _clean(fit.c)},
            "flags": list(fit.flags),
        }
    return block


def per_distortion_block(results: Sequence[EntryResult], metrics: Sequence[str]) -> dict:
    """PCC/SCC per distortion label (rows: metrics, columns: distortions)."""
    labels = sorted({r.distortion for r in results if r.mos is not None})
    table = {}
    for label in labels:
        subset = [r for r in results if r.distortion == label and r.mos is not None]
        table[label] = statistics_block(subset, metrics)
    return table


def curve_samples(metric: Sequence[float], mos: Sequence[float], fit: dict, n: int = 101):
    """Points of the fitted logistic curve across the metric range (plot data)."""
    lo, hi = float(np.min(metric)), float(np.max(metric))
    xs = np.linspace(lo, hi, n)
    a, b, c = (fit["logistic"][k] for k in ("a", "b", "c"))
    if a is None:
        return []
    return list(zip(xs.tolist(), logistic(xs, a, b, c).tolist()))


def write_components_csv(path, records: Iterable[ComponentRecord]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPONENT_COLUMNS)
    for r in records:
        for i, (q, v, s) in enumerate(zip(r.q, r.vif, r.var)):
            w.writerow([r.id, r.distortion, i, _fmt(float(q)), _fmt(float(v)), _fmt(float(s)),
                        "" if r.mos is None else _fmt(float(r.mos))])
    Path(path).write_text(buf.getvalue())


def read_components_csv(path) -> list[ComponentRecord]:
    """Group a per-frame components CSV into one record per sequence id."""
    groups: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COMPONENT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            g = groups.setdefault(row["id"], {"distortion": row["distortion"], "rows": [],
                                              "mos": row["mos"]})
            g["rows"].append((int(row["frame_index"]), float(row["q_cyclopean_mean"]),
                              float(row["vif_depth"]), float(row["variance_term"])))
    records = []
    for key, g in groups.items():
        rows = sorted(g["rows"])
        arr = np.array([r[1:] for r in rows])
        mos = float(g["mos"]) if g["mos"] not in ("", None) else None
        records.append(ComponentRecord(key, arr[:, 0], arr[:, 1], arr[:, 2], mos, g["distortion"]))
    return records


def time_metrics(ref: StereoSequence, dist: StereoSequence, metrics: Sequence[str],
                 geom: DisplayGeometry, params: MetricParams, threads: int = 1) -> dict:
    """Mean wall-clock seconds per frame for each metric.

    2-D baselines are timed on both views of every frame; the HV3D entries
    include the reference-side block matching.
    """
    out = {}
    n = len(ref)
    for name in metrics:
        t0 = time.perf_counter()
        if name in BASELINES:
            baseline_frame_scores(ref, dist, [name])
        elif name in ("hv3d", "fast-hv3d"):
            p = replace(params, fast_mode=(name == "fast-hv3d"))
            hv3d_sequence(ref, dist, geom, p, reference=prepare_reference(ref, geom, p, threads),
                          threads=threads)
        else:
            raise ValueError(f"unknown metric {name!r}")
        out[name] = (time.perf_counter() - t0) / n
    return out
