"""Command-line entry point: ``hv3d {score,batch,train,distort,timing}``.

Exit codes: 0 success, 1 degenerate frames were flagged, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import DisplayGeometry, MetricParams, fovea_block_size
from .distort import DistortionSpec, UnsupportedDistortion, distort_stereo, write_distorted
from .evaluate import (
    BASELINES,
    EntryResult,
    baseline_frame_scores,
    curve_samples,
    frame_rows_csv,
    per_distortion_block,
    read_components_csv,
    score_pair,
    statistics_block,
    time_metrics,
    write_components_csv,
)
from .pooling import (
    DEFAULT_P_GRID,
    DEFAULT_TAU_GRID,
    ComponentRecord,
    PoolingParams,
    minkowski_pool,
    recombine,
    train_exponents,
    train_pooling,
)
from .quality2d import VIF_VARIANT
from .video_io import (
    ManifestError,
    StereoPaths,
    VideoIOError,
    load_dataset_manifest,
    load_stereo_sequence,
)

log = logging.getLogger("hv3d")

EXIT_OK, EXIT_DEGENERATE, EXIT_INPUT = 0, 1, 2
DEGENERATE_FLAGS = ("depth_degenerate", "ssim_floored")


class UsageError(ValueError):
    pass


# flag dest -> (config section, field, converter)
PARAM_FLAGS = {
    "width": ("input", "width", int),
    "height": ("input", "height", int),
    "fps": ("input", "fps", float),
    "disp_scale": ("input", "disp_scale", float),
    "frames": ("input", "frames", int),
    "block_size": ("metric", "m", int),
    "search_range": ("metric", "M", int),
    "fovea_k": ("metric", "k", int),
    "beta1": ("metric", "beta1", float),
    "beta2": ("metric", "beta2", float),
    "beta3": ("metric", "beta3", float),
    "fast": ("metric", "fast_mode", bool),
    "disparity_sign": ("metric", "disparity_sign", int),
    "no_alternate": ("metric", "alternate_views", lambda v: not v),
    "normalize_vif_depth": ("metric", "normalize_vif_depth", bool),
    "p": ("pooling", "p", float),
    "tau": ("pooling", "tau", float),
    "pooling_mode": ("pooling", "weight_mode", str),
    "recency_sign": ("pooling", "recency_sign", str),
    "viewing_distance": ("geometry", "viewing_distance_mm", float),
    "display_height": ("geometry", "display_height_mm", float),
    "vertical_resolution": ("geometry", "vertical_resolution_px", int),
    "fovea_angle": ("geometry", "fovea_full_angle_deg", float),
    "threads": ("run", "threads", int),
    "seed": ("run", "seed", int),
}


@dataclass
class RunConfig:
    command: str
    metric: MetricParams
    geometry: DisplayGeometry
    pooling: PoolingParams
    out: Path
    threads: int = 1
    seed: int = 0
    width: int | None = None
    height: int | None = None
    fps: float = 25.0
    disp_scale: float = 1.0
    frames: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        metric = self.metric.to_dict()
        metric["k_resolved"] = self.fovea_k
        return {
            "command": self.command,
            "version": __version__,
            "metric": metric,
            "geometry": asdict(self.geometry),
            "pooling": asdict(self.pooling),
            "threads": self.threads,
            "seed": self.seed,
            "input": {"width": self.width, "height": self.height, "fps": self.fps,
                      "disp_scale": self.disp_scale, "frames": self.frames},
            "vif_variant": VIF_VARIANT,
            **self.extra,
        }

    @property
    def fovea_k(self) -> int:
        return self.metric.k if self.metric.k is not None else fovea_block_size(
            self.geometry, self.metric.m)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge built-in defaults < HV3D_THREADS < config file < command-line flags."""
    sections: dict = {"metric": {}, "pooling": {}, "geometry": {}, "input": {}, "run": {}}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise FileNotFoundError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
        for sec, values in doc.items():
            if sec not in sections or not isinstance(values, dict):
                raise UsageError(f"unknown config section {sec!r}")
            sections[sec].update(values)
    if "threads" not in sections["run"] and os.environ.get("HV3D_THREADS"):
        sections["run"]["threads"] = int(os.environ["HV3D_THREADS"])
    for dest, (sec, name, conv) in PARAM_FLAGS.items():
        value = getattr(args, dest, None)
        if value is None or value is False and dest in ("fast", "no_alternate",
                                                        "normalize_vif_depth"):
            continue
        sections[sec][name] = conv(value)
    try:
        metric = MetricParams(**sections["metric"])
        pooling = PoolingParams(**sections["pooling"])
        geometry = DisplayGeometry(**sections["geometry"])
    except TypeError as exc:
        raise UsageError(f"bad configuration: {exc}") from None
    run, inp = sections["run"], sections["input"]
    return RunConfig(
        command=args.command,
        metric=metric,
        geometry=geometry,
        pooling=pooling,
        out=Path(getattr(args, "out", None) or "."),
        threads=max(1, int(run.get("threads", 1))),
        seed=int(run.get("seed", 0)),
        width=inp.get("width"),
        height=inp.get("height"),
        fps=float(inp.get("fps", 25.0)),
        disp_scale=float(inp.get("disp_scale", 1.0)),
        frames=inp.get("frames"),
    )


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _require_dims(cfg: RunConfig):
    if not cfg.width or not cfg.height:
        raise UsageError("--width and --height are required")


def _flag_counts(frames) -> dict:
    counts: dict = {}
    for f in frames:
        for flag in f.flags:
            counts[flag] = counts.get(flag, 0) + 1
    return dict(sorted(counts.items()))


def _exit_for(counts: dict) -> int:
    return EXIT_DEGENERATE if any(counts.get(f) for f in DEGENERATE_FLAGS) else EXIT_OK


# --- score ----------------------------------------------------------------------


def cmd_score(args, cfg: RunConfig) -> int:
    _require_dims(cfg)
    ref_paths = StereoPaths(Path(args.ref_left), Path(args.ref_right), Path(args.ref_disp),
                            Path(args.ref_disp_r2l) if args.ref_disp_r2l else None)
    dist_paths = StereoPaths(Path(args.dist_left), Path(args.dist_right), Path(args.dist_disp),
                             Path(args.dist_disp_r2l) if args.dist_disp_r2l else None)
    ref = load_stereo_sequence(ref_paths, cfg.width, cfg.height, cfg.fps, cfg.disp_scale,
                               cfg.frames)
    dist = load_stereo_sequence(dist_paths, cfg.width, cfg.height, cfg.fps, cfg.disp_scale,
                                cfg.frames)
    frames, pooled, timings = score_pair(ref, dist, cfg.geometry, cfg.metric, cfg.pooling,
                                         cfg.threads)
    out = cfg.out
    _write_text(out / "frames.csv", frame_rows_csv(frames))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame_index", "seconds"])
    for i, t in enumerate(timings):
        w.writerow([i, f"{t:.6f}"])
    _write_text(out / "timing.csv", buf.getvalue())
    counts = _flag_counts(frames)
    summary = {
        "pooled_hv3d": pooled,
        "frames": len(frames),
        "mode": "fast" if cfg.metric.fast_mode else "full",
        "pooling_mode": {"weight_mode": cfg.pooling.weight_mode,
                         "recency_sign": cfg.pooling.recency_sign},
        "flag_counts": counts,
        "inputs": {"ref": {k: str(v) for k, v in asdict(ref_paths).items()},
                   "dist": {k: str(v) for k, v in asdict(dist_paths).items()}},
        "config": cfg.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    print(f"pooled HV3D = {pooled:.6f} over {len(frames)} frames "
          f"({summary['mode']} mode) -> {out}")
    return _exit_for(counts)


# --- batch / train helpers ------------------------------------------------------


def _load_entry(entry, cfg: RunConfig):
    ref = load_stereo_sequence(entry.reference, entry.width, entry.height, entry.fps,
                               entry.disp_scale, cfg.frames)
    dist = load_stereo_sequence(entry.distorted, entry.width, entry.height, entry.fps,
                                entry.disp_scale, cfg.frames)
    return ref, dist


def _score_entries(manifest, cfg: RunConfig, baselines=(), baseline_pooling=False,
                   frames_dir: Path | None = None) -> list[EntryResult]:
    def one(entry):
        ref, dist = _load_entry(entry, cfg)
        frames, pooled, timings = score_pair(ref, dist, cfg.geometry, cfg.metric,
                                             cfg.pooling, 1)
        res = EntryResult(entry.id, entry.distortion, entry.mos, frames, {"hv3d": pooled},
                          timings)
        for name, per_frame in baseline_frame_scores(ref, dist, baselines).items():
            if baseline_pooling:
                res.pooled[name] = minkowski_pool(np.maximum(per_frame, 0.0), cfg.pooling)
            else:
                res.pooled[name] = float(np.mean(per_frame))
        if frames_dir is not None:
            _write_text(frames_dir / f"{entry.id}.csv", frame_rows_csv(frames))
        log.info("scored %s: hv3d=%.6f", entry.id, pooled)
        return res

    entries = list(manifest)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, entries))
    return [one(e) for e in entries]


def _format_report(results, metrics, stats, breakdown) -> str:
    lines = ["HV3D evaluation report", ""]
    lines.append(f"{'id':<24}{'distortion':<20}{'mos':>8}" + "".join(f"{m:>12}" for m in metrics))
    for r in results:
        mos = "-" if r.mos is None else f"{r.mos:.3f}"
        lines.append(f"{r.id:<24}{r.distortion:<20}{mos:>8}"
                     + "".join(f"{r.pooled[m]:>12.6f}" for m in metrics))
    lines.append("")
    if "skipped" in stats:
        lines.append(f"statistics: {stats['skipped']}")
    else:
        lines.append(f"{'metric':<12}{'SCC':>10}{'PCC':>10}{'RMSE':>10}{'OR':>10}")
        for m in metrics:
            s = stats["metrics"][m]
            vals = [s[k] for k in ("scc", "pcc", "rmse", "outlier_ratio")]
            lines.append(f"{m:<12}" + "".join(
                f"{v:>10.4f}" if v is not None else f"{'n/a':>10}" for v in vals))
        lines.append(f"outliers: {stats['outlier_rule']}")
    if breakdown:
        lines.append("")
        lines.append("per-distortion PCC / SCC")
        labels = list(breakdown)
        lines.append(f"{'metric':<12}" + "".join(f"{lab[:18]:>20}" for lab in labels))
        for m in metrics:
            cells = []
            for lab in labels:
                block = breakdown[lab]
                if "skipped" in block:
                    cells.append(f"{'n/a':>20}")
                else:
                    s = block["metrics"][m]
                    pcc = "n/a" if s["pcc"] is None else f"{s['pcc']:.4f}"
                    scc = "n/a" if s["scc"] is None else f"{s['scc']:.4f}"
                    cells.append(f"{pcc + ' / ' + scc:>20}")
            lines.append(f"{m:<12}" + "".join(cells))
    return "\n".join(lines) + "\n"


def cmd_batch(args, cfg: RunConfig) -> int:
    manifest = load_dataset_manifest(args.manifest)
    baselines = [b for b in (args.baselines or "").split(",") if b]
    for b in baselines:
        if b not in BASELINES:
            raise UsageError(f"unknown baseline {b!r}; choose from {', '.join(BASELINES)}")
    out = cfg.out
    results = _score_entries(manifest, cfg, baselines, args.baseline_pooling, out / "frames")
    metrics = ["hv3d", *baselines]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "distortion", "mos", *metrics])
    for r in results:
        w.writerow([r.id, r.distortion, "" if r.mos is None else repr(r.mos),
                    *(repr(r.pooled[m]) for m in metrics)])
    _write_text(out / "scores.csv", buf.getvalue())
    write_components_csv(out / "components.csv", _components(results))

    stats = statistics_block(results, metrics)
    if "skipped" in stats:
        print(f"notice: {stats['skipped']}", file=sys.stderr)
    breakdown = per_distortion_block(results, metrics) if "skipped" not in stats else {}
    if "metrics" in stats:
        rated = [r for r in results if r.mos is not None]
        for m in metrics:
            pts = curve_samples([r.pooled[m] for r in rated], [r.mos for r in rated],
                                stats["metrics"][m])
            cb = io.StringIO()
            cw = csv.writer(cb, lineterminator="\n")
            cw.writerow(["metric_value", "predicted_mos"])
            cw.writerows((repr(x), repr(y)) for x, y in pts)
            _write_text(out / "curves" / f"{m}.csv", cb.getvalue())
    counts: dict = {}
    for r in results:
        for k, v in _flag_counts(r.frames).items():
            counts[k] = counts.get(k, 0) + v
    report = {
        "entries": [{"id": r.id, "distortion": r.distortion, "mos": r.mos, "scores": r.pooled,
                     "frames": len(r.frames), "flag_counts": _flag_counts(r.frames)}
                    for r in results],
        "statistics": stats,
        "per_distortion": breakdown,
        "baseline_rule": "per-frame 2-D metric averaged over both views, then "
                         + ("Minkowski-pooled" if args.baseline_pooling else "averaged")
                         + " over frames",
        "config": cfg.to_dict(),
    }
    _write_json(out / "report.json", report)
    text = _format_report(results, metrics, stats, breakdown)
    _write_text(out / "report.txt", text)
    print(text, end="")
    return _exit_for(counts)


def _components(results) -> list[ComponentRecord]:
    return [ComponentRecord(
        r.id,
        np.array([f.q_cyclopean_mean for f in r.frames]),
        np.array([f.vif_depth for f in r.frames]),
        np.array([f.variance_term for f in r.frames]),
        r.mos, r.distortion) for r in results]


# --- train ---------------------------------------------------------------------


def _parse_grid(text: str | None, default, name: str):
    if text is None:
        return list(default)
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise UsageError(f"empty {name} grid")
    return values


def _cache_key(manifest, cfg: RunConfig) -> str:
    h = hashlib.sha256()
    h.update(Path(manifest.path).read_bytes())
    for e in manifest:
        for paths in (e.reference, e.distorted):
            for p in asdict(paths).values():
                if p is not None:
                    st = Path(p).stat()
                    h.update(f"{p}:{st.st_size}:{st.st_mtime_ns}".encode())
    relevant = {k: v for k, v in cfg.metric.to_dict().items()
                if k not in ("beta1", "beta2", "beta3")}
    h.update(json.dumps([relevant, asdict(cfg.geometry), cfg.frames], sort_keys=True).encode())
    return h.hexdigest()


def cmd_train(args, cfg: RunConfig) -> int:
    p_grid = _parse_grid(args.p_grid, DEFAULT_P_GRID, "p")
    tau_grid = _parse_grid(args.tau_grid, DEFAULT_TAU_GRID, "tau")
    if args.beta_step is not None and args.beta_step <= 0:
        raise UsageError("--beta-step must be > 0")
    step = args.beta_step if args.beta_step is not None else 0.01
    lo, hi = args.beta_min, args.beta_max
    if hi < lo:
        raise UsageError("empty beta grid: --beta-max < --beta-min")
    out = cfg.out
    cache = out / "components.csv"
    cache_meta = out / "components.key"
    if args.components:
        records = read_components_csv(args.components)
        source = f"components file {args.components}"
    else:
        if not args.manifest:
            raise UsageError("train needs --manifest or --components")
        manifest = load_dataset_manifest(args.manifest)
        key = _cache_key(manifest, cfg)
        if cache.exists() and cache_meta.exists() and cache_meta.read_text().strip() == key:
            log.warning("component cache hit (%s): skipping frame scoring", cache)
            records = read_components_csv(cache)
            source = "cache"
        else:
            results = _score_entries(manifest, cfg)
            records = _components(results)
            write_components_csv(cache, records)
            _write_text(cache_meta, key + "\n")
            source = "scored"
    records = [r for r in records if r.mos is not None]
    if len(records) < 8:
        raise UsageError(f"training needs at least 8 MOS-bearing records, found {len(records)}")
    betas = train_exponents(records, step, lo, hi, cfg.pooling)
    frame_scores = [recombine(r.q, r.vif, r.var, betas.beta1, betas.beta2, betas.beta3)
                    for r in records]
    pool = train_pooling(frame_scores, [r.mos for r in records], p_grid, tau_grid,
                         cfg.pooling.weight_mode, cfg.pooling.recency_sign)
    result = {
        "beta1": betas.beta1, "beta2": betas.beta2, "beta3": betas.beta3,
        "p": pool.p, "tau": pool.tau,
        "pcc_at_optimum": pool.pcc,
        "pcc_exponent_search": betas.pcc,
        "grid": {"beta": {"min": lo, "max": hi, "step": step,
                          "evaluations": betas.evaluations},
                 "p": p_grid, "tau": tau_grid, "pooling_evaluations": pool.evaluations},
        "records": len(records),
        "components_source": source,
        "config": cfg.to_dict(),
    }
    _write_json(out / "params.json", result)
    print(f"beta = ({betas.beta1:.2f}, {betas.beta2:.2f}, {betas.beta3:.2f}), "
          f"p = {pool.p:g}, tau = {pool.tau:g}, PCC = {pool.pcc:.6f}")
    return EXIT_OK


# --- distort -------------------------------------------------------------------


def cmd_distort(args, cfg: RunConfig) -> int:
    _require_dims(cfg)
    levels = [float(v) for v in args.levels.split(",") if v.strip()]
    if not levels:
        raise UsageError("no severity levels given")
    severity_range = None
    if args.range:
        severity_range = tuple(float(v) for v in args.range.split(","))
        if len(severity_range) != 2:
            raise UsageError("--range takes lo,hi")
    specs = [DistortionSpec(args.kind, lvl, args.kernel_size, args.temporal_mode,
                            severity_range, cfg.seed) for lvl in levels]
    paths = StereoPaths(Path(args.left), Path(args.right), Path(args.disp),
                        Path(args.disp_r2l) if args.disp_r2l else None)
    src = load_stereo_sequence(paths, cfg.width, cfg.height, cfg.fps, 1.0, cfg.frames)
    for spec in specs:
        level = f"{spec.severity:g}"
        target = cfg.out / f"{spec.kind}_{level}"
        out = distort_stereo(src, spec, distort_depth=not args.keep_depth)
        write_distorted(target, out, spec, asdict(paths))
        print(f"wrote {target}")
    return EXIT_OK


# --- timing --------------------------------------------------------------------


def cmd_timing(args, cfg: RunConfig) -> int:
    manifest = load_dataset_manifest(args.manifest)
    entries = list(manifest)[: args.limit] if args.limit else list(manifest)
    if not entries:
        raise UsageError("timing needs at least one manifest entry")
    metrics = [m for m in args.metrics.split(",") if m]
    if "psnr" not in metrics:
        metrics.insert(0, "psnr")
    totals = {m: 0.0 for m in metrics}
    frames = 0
    for entry in entries:
        ref, dist = _load_entry(entry, cfg)
        per = time_metrics(ref, dist, metrics, cfg.geometry, cfg.metric, cfg.threads)
        for m in metrics:
            totals[m] += per[m] * len(ref)
        frames += len(ref)
    per_frame = {m: totals[m] / frames for m in metrics}
    rows = [{"metric": m, "seconds_per_frame": per_frame[m],
             "relative_to_psnr": per_frame[m] / per_frame["psnr"] if per_frame["psnr"] > 0
             else float("nan")} for m in metrics]
    rows[[r["metric"] for r in rows].index("psnr")]["relative_to_psnr"] = 1.0
    report = {"rows": rows, "frames": frames, "entries": len(entries),
              "threads": cfg.threads, "config": cfg.to_dict()}
    _write_json(cfg.out / "timing.json", report)
    print(f"{'metric':<12}{'s/frame':>12}{'x PSNR':>10}   (threads={cfg.threads}, frames={frames})")
    for r in rows:
        print(f"{r['metric']:<12}{r['seconds_per_frame']:>12.4f}{r['relative_to_psnr']:>10.2f}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("input")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--fps", type=float)
    g.add_argument("--disp-scale", type=float, help="disparity pixels per stored unit")
    g.add_argument("--frames", type=int, help="only process the first N frames")
    m = p.add_argument_group("metric")
    m.add_argument("--block-size", type=int, help="m (default 16)")
    m.add_argument("--search-range", type=int, help="M (default 64)")
    m.add_argument("--fovea-k", type=int, help="k; default derived from display geometry")
    m.add_argument("--beta1", type=float)
    m.add_argument("--beta2", type=float)
    m.add_argument("--beta3", type=float)
    m.add_argument("--fast", action="store_true", help="skip exhaustive match refinement")
    m.add_argument("--disparity-sign", type=int, choices=(1, -1))
    m.add_argument("--no-alternate", action="store_true",
                   help="keep the left view as base on every frame")
    m.add_argument("--normalize-vif-depth", action="store_true")
    m.add_argument("--viewing-distance", type=float, help="mm")
    m.add_argument("--display-height", type=float, help="mm")
    m.add_argument("--vertical-resolution", type=int, help="pixels")
    m.add_argument("--fovea-angle", type=float, help="full angle 2*alpha in degrees")
    q = p.add_argument_group("pooling")
    q.add_argument("--p", type=float)
    q.add_argument("--tau", type=float)
    q.add_argument("--pooling-mode", choices=("normalized", "literal"))
    q.add_argument("--recency-sign", choices=("toward_last", "as_printed"))
    r = p.add_argument_group("run")
    r.add_argument("--threads", type=int, help="worker threads (env HV3D_THREADS)")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--config", help="JSON config merged under the flags")
    r.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hv3d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("score", help="score one distorted stereo pair against its reference")
    for side in ("ref", "dist"):
        s.add_argument(f"--{side}-left", required=True)
        s.add_argument(f"--{side}-right", required=True)
        s.add_argument(f"--{side}-disp", required=True, help="left-to-right disparity")
        s.add_argument(f"--{side}-disp-r2l", help="right-to-left disparity")
    _add_common(s)

    b = sub.add_parser("batch", help="score a manifest and report correlation statistics")
    b.add_argument("manifest")
    b.add_argument("--baselines", default="", help="comma list from psnr,ssim,vif")
    b.add_argument("--baseline-pooling", action="store_true",
                   help="Minkowski-pool baseline frame scores instead of averaging")
    _add_common(b)

    t = sub.add_parser("train", help="fit exponents and pooling parameters")
    t.add_argument("--manifest")
    t.add_argument("--components", help="per-frame components CSV instead of scoring")
    t.add_argument("--beta-step", type=float)
    t.add_argument("--beta-min", type=float, default=0.0)
    t.add_argument("--beta-max", type=float, default=1.0)
    t.add_argument("--p-grid", help="comma list (default 1..12)")
    t.add_argument("--tau-grid", help="comma list (default 10,25,50,100,200,400)")
    _add_common(t)

    d = sub.add_parser("distort", help="generate noise/blur/brightness distorted copies")
    d.add_argument("--left", required=True)
    d.add_argument("--right", required=True)
    d.add_argument("--disp", required=True)
    d.add_argument("--disp-r2l")
    d.add_argument("--kind", required=True,
                   help="gaussian_noise | gaussian_blur | brightness_shift")
    d.add_argument("--levels", required=True,
                   help="comma list of severities (variance, sigma or delta)")
    d.add_argument("--kernel-size", type=int, default=5)
    d.add_argument("--temporal-mode", default="constant",
                   choices=("constant", "per_frame_random"))
    d.add_argument("--range", help="lo,hi for per_frame_random")
    d.add_argument("--keep-depth", action="store_true",
                   help="copy disparity maps unchanged")
    _add_common(d)

    tm = sub.add_parser("timing", help="per-frame run time of each metric relative to PSNR")
    tm.add_argument("manifest")
    tm.add_argument("--metrics", default="psnr,ssim,vif,fast-hv3d,hv3d")
    tm.add_argument("--limit", type=int, help="only the first N entries")
    _add_common(tm)
    return parser


COMMANDS = {
    "score": cmd_score,
    "batch": cmd_batch,
    "train": cmd_train,
    "distort": cmd_distort,
    "timing": cmd_timing,
}


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    path = getattr(exc, "filename", None) or getattr(exc, "path", None)
    if path:
        payload["path"] = str(path)
    print(f"hv3d: error: {exc}", file=sys.stderr)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg)
    except (FileNotFoundError, VideoIOError, ManifestError, UnsupportedDistortion,
            UsageError) as exc:
        return _fail(exc, EXIT_INPUT)
    except ValueError as exc:
        return _fail(exc, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
