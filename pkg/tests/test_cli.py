import argparse
import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from hv3d import cli
from hv3d.evaluate import read_components_csv, write_components_csv
from hv3d.pooling import ComponentRecord, minkowski_pool, recombine
from hv3d.synthetic import make_stereo_clip, write_clip
from hv3d.video_io import write_dataset_manifest

W, H = 96, 64
DIMS = ["--width", str(W), "--height", str(H)]


def _paths(p):
    return {"left": str(p.left), "right": str(p.right), "disp_l2r": str(p.disp_l2r),
            "disp_r2l": str(p.disp_r2l)}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """Eight noise/blur distortions of one small clip, with made-up MOS."""
    root = tmp_path_factory.mktemp("data")
    ref = write_clip(root / "ref", make_stereo_clip(W, H, 3, seed=6))
    args = ["--left", str(ref.left), "--right", str(ref.right), "--disp", str(ref.disp_l2r),
            "--disp-r2l", str(ref.disp_r2l), "--seed", "5", "--out", str(root / "dist")] + DIMS
    assert cli.main(["distort", "--kind", "gaussian_noise", "--levels",
                     "0.0005,0.002,0.005,0.01"] + args) == 0
    assert cli.main(["distort", "--kind", "gaussian_blur", "--levels", "0.5,1,2,4"] + args) == 0
    levels = [("gaussian_noise", v) for v in ("0.0005", "0.002", "0.005", "0.01")] + \
             [("gaussian_blur", v) for v in ("0.5", "1", "2", "4")]
    mos = [8.5, 7.1, 5.2, 3.9, 9.0, 7.7, 5.9, 4.4]
    entries = []
    for (kind, level), m in zip(levels, mos):
        d = root / "dist" / f"{kind}_{level}"
        dist = {"left": str(d / "left.yuv"), "right": str(d / "right.yuv"),
                "disp_l2r": str(d / "disp_l2r.raw"), "disp_r2l": str(d / "disp_r2l.raw")}
        entries.append({"id": f"{kind}_{level}", "ref": _paths(ref), "dist": dist,
                        "distortion": kind, "mos": m})
    write_dataset_manifest(root / "manifest.json", entries, width=W, height=H, fps=25)
    return root, ref


def _score_args(ref, dist_dir, out):
    return ["score", "--ref-left", str(ref.left), "--ref-right", str(ref.right),
            "--ref-disp", str(ref.disp_l2r), "--ref-disp-r2l", str(ref.disp_r2l),
            "--dist-left", str(dist_dir / "left.yuv"), "--dist-right", str(dist_dir / "right.yuv"),
            "--dist-disp", str(dist_dir / "disp_l2r.raw"),
            "--dist-disp-r2l", str(dist_dir / "disp_r2l.raw"), "--out", str(out)] + DIMS


def _ns(**kw):
    base = {dest: None for dest in cli.PARAM_FLAGS}
    base.update(fast=False, no_alternate=False, normalize_vif_depth=False, command="score",
                config=None, out=None)
    base.update(kw)
    return argparse.Namespace(**base)


def test_config_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"metric": {"m": 8, "beta1": 0.5}, "pooling": {"p": 3},
                                    "run": {"seed": 4}}))
    monkeypatch.setenv("HV3D_THREADS", "3")
    cfg = cli.resolve_config(_ns(config=str(cfg_file), beta1=0.7))
    assert cfg.metric.m == 8
    assert cfg.metric.beta1 == 0.7
    assert cfg.pooling.p == 3
    assert cfg.seed == 4
    assert cfg.threads == 3
    cfg_file.write_text(json.dumps({"run": {"threads": 2}}))
    assert cli.resolve_config(_ns(config=str(cfg_file))).threads == 2
    assert cli.resolve_config(_ns(config=str(cfg_file), threads=5)).threads == 5


def test_config_defaults_and_fovea():
    cfg = cli.resolve_config(_ns())
    assert (cfg.metric.beta1, cfg.metric.beta2, cfg.metric.beta3) == (0.4, 0.1, 0.29)
    assert (cfg.pooling.p, cfg.pooling.tau) == (9.0, 100.0)
    assert cfg.to_dict()["metric"]["k_resolved"] == 64
    assert cfg.to_dict()["vif_variant"] == "vifp-pixel-domain-4scale"


def test_bad_config_section(tmp_path, capsys):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"colour": {}}))
    assert cli.main(["batch", "m.json", "--config", str(cfg_file)]) == 2
    assert "unknown config section" in capsys.readouterr().err


def test_score_outputs(dataset, tmp_path, capsys):
    root, ref = dataset
    out = tmp_path / "s"
    assert cli.main(_score_args(ref, root / "dist" / "gaussian_noise_0.005", out)) == 0
    rows = list(csv.DictReader((out / "frames.csv").open()))
    assert len(rows) == 3
    assert [r["base_view"] for r in rows] == ["left", "right", "left"]
    summary = json.loads((out / "summary.json").read_text())
    frame_scores = [float(r["hv3d"]) for r in rows]
    assert summary["pooled_hv3d"] == pytest.approx(minkowski_pool(frame_scores))
    assert summary["mode"] == "full"
    timing = list(csv.DictReader((out / "timing.csv").open()))
    assert len(timing) == 3
    assert "pooled HV3D" in capsys.readouterr().out


def test_score_fast_flag(dataset, tmp_path):
    root, ref = dataset
    out = tmp_path / "f"
    assert cli.main(_score_args(ref, root / "dist" / "gaussian_blur_1", out) + ["--fast"]) == 0
    assert json.loads((out / "summary.json").read_text())["mode"] == "fast"


def test_score_missing_file(dataset, tmp_path, capsys):
    root, ref = dataset
    args = _score_args(ref, root / "dist" / "nope", tmp_path / "x")
    assert cli.main(args) == 2
    err = capsys.readouterr().err
    assert "nope" in err
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["exit_code"] == 2


def test_score_needs_dimensions(dataset, tmp_path):
    root, ref = dataset
    args = _score_args(ref, root / "dist" / "gaussian_blur_1", tmp_path / "x")[:-4]
    assert cli.main(args) == 2


def test_score_degenerate_exit_code(tmp_path):
    clip = make_stereo_clip(W, H, 2, seed=1)
    zero = [m.__class__(np.zeros_like(m.stored)) for m in clip.disparity_l2r]
    flat = replace(clip, disparity_l2r=tuple(zero), disparity_r2l=tuple(zero))
    ref = write_clip(tmp_path / "r", flat)
    assert cli.main(_score_args(ref, tmp_path / "r", tmp_path / "o")) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["flag_counts"]["depth_degenerate"] == 2


def test_batch(dataset, tmp_path):
    root, _ = dataset
    out = tmp_path / "b"
    assert cli.main(["batch", str(root / "manifest.json"), "--baselines", "psnr,ssim",
                     "--out", str(out)]) == 0
    scores = list(csv.DictReader((out / "scores.csv").open()))
    assert len(scores) == 8
    assert {"hv3d", "psnr", "ssim"} <= set(scores[0])
    report = json.loads((out / "report.json").read_text())
    stats = report["statistics"]["metrics"]
    assert set(stats) == {"hv3d", "psnr", "ssim"}
    assert -1 <= stats["hv3d"]["pcc"] <= 1
    assert set(report["per_distortion"]) == {"gaussian_blur", "gaussian_noise"}
    assert (out / "curves" / "hv3d.csv").exists()
    assert len(list((out / "frames").glob("*.csv"))) == 8
    assert "SCC" in (out / "report.txt").read_text()


def test_train_from_manifest_uses_cache(dataset, tmp_path, caplog):
    root, _ = dataset
    out = tmp_path / "t"
    args = ["train", "--manifest", str(root / "manifest.json"), "--beta-step", "0.25",
            "--p-grid", "1,9", "--tau-grid", "100", "--out", str(out)]
    assert cli.main(args) == 0
    first = json.loads((out / "params.json").read_text())
    assert first["components_source"] == "scored"
    assert first["grid"]["beta"]["evaluations"] == 125
    caplog.clear()
    assert cli.main(args) == 0
    second = json.loads((out / "params.json").read_text())
    assert second["components_source"] == "cache"
    assert "component cache hit" in caplog.text
    assert first["beta1"] == second["beta1"] and first["p"] == second["p"]


def test_train_from_components_recovers_planted(tmp_path):
    rng = np.random.default_rng(1)
    records = []
    for i in range(10):
        q, v, s = rng.uniform(0.5, 1, 12), rng.uniform(0.1, 1, 12), rng.uniform(0.1, 1, 12)
        mos = 10 * minkowski_pool(recombine(q, v, s, 0.4, 0.1, 0.3))
        records.append(ComponentRecord(f"s{i}", q, v, s, mos, "noise"))
    write_components_csv(tmp_path / "c.csv", records)
    out = tmp_path / "t"
    assert cli.main(["train", "--components", str(tmp_path / "c.csv"), "--beta-step", "0.1",
                     "--out", str(out)]) == 0
    params = json.loads((out / "params.json").read_text())
    assert (params["beta1"], params["beta2"], params["beta3"]) == (0.4, 0.1, 0.3)
    assert (params["p"], params["tau"]) == (9, 100)


def test_train_usage_errors(tmp_path):
    assert cli.main(["train", "--out", str(tmp_path)]) == 2
    assert cli.main(["train", "--components", "x.csv", "--p-grid", ",",
                     "--out", str(tmp_path)]) == 2
    assert cli.main(["train", "--components", "x.csv", "--beta-step", "0",
                     "--out", str(tmp_path)]) == 2


def test_components_roundtrip(tmp_path):
    rec = ComponentRecord("a", np.array([0.9, 0.8]), np.array([0.5, 0.4]),
                          np.array([0.3, 0.2]), 6.5, "blur")
    write_components_csv(tmp_path / "c.csv", [rec])
    back = read_components_csv(tmp_path / "c.csv")[0]
    assert back.id == "a" and back.distortion == "blur" and back.mos == 6.5
    assert back.q.tolist() == [0.9, 0.8] and back.var.tolist() == [0.3, 0.2]
    (tmp_path / "bad.csv").write_text("id,frame_index\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_components_csv(tmp_path / "bad.csv")


def test_distort_unsupported_kind(dataset, tmp_path, capsys):
    _, ref = dataset
    rc = cli.main(["distort", "--left", str(ref.left), "--right", str(ref.right),
                   "--disp", str(ref.disp_l2r), "--kind", "3d_hevc", "--levels", "1",
                   "--out", str(tmp_path)] + DIMS)
    assert rc == 2
    assert "external reference software" in capsys.readouterr().err


def test_distort_layout(dataset):
    root, _ = dataset
    level = root / "dist" / "gaussian_noise_0.002"
    assert sorted(p.name for p in level.iterdir()) == [
        "disp_l2r.raw", "disp_r2l.raw", "distortion.json", "left.yuv", "right.yuv"]
    meta = json.loads((level / "distortion.json").read_text())
    assert meta["spec"]["severity"] == 0.002 and meta["spec"]["seed"] == 5


def test_timing(dataset, tmp_path):
    root, _ = dataset
    out = tmp_path / "tm"
    assert cli.main(["timing", str(root / "manifest.json"), "--limit", "1",
                     "--metrics", "ssim,fast-hv3d", "--out", str(out)]) == 0
    report = json.loads((out / "timing.json").read_text())
    names = [r["metric"] for r in report["rows"]]
    assert names == ["psnr", "ssim", "fast-hv3d"]
    assert report["rows"][0]["relative_to_psnr"] == 1.0
    assert report["threads"] == 1


def _subset_manifest(root, ids, path, mos=None):
    doc = json.loads((root / "manifest.json").read_text())
    doc["entries"] = [e for e in doc["entries"] if e["id"] in ids]
    for e in doc["entries"]:
        if mos is not None:
            e["mos"] = mos[e["id"]]
        for side in ("ref", "dist"):
            e[side] = {k: str(root / v) if not v.startswith("/") else v
                       for k, v in e[side].items()}
    path.write_text(json.dumps(doc))
    return path


def test_batch_three_entries_and_baseline_averaging(dataset, tmp_path):
    from hv3d.quality2d import psnr
    from hv3d.video_io import load_yuv_sequence

    root, ref = dataset
    ids = ["gaussian_noise_0.002", "gaussian_blur_1", "gaussian_blur_4"]
    manifest = _subset_manifest(root, ids, tmp_path / "m.json")
    out = tmp_path / "b"
    assert cli.main(["batch", str(manifest), "--baselines", "psnr", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "scores.csv").open()))
    assert [r["id"] for r in rows] == ids
    report = json.loads((out / "report.json").read_text())
    assert report["statistics"]["n"] == 3
    # left/right per-frame average, then the mean over frames
    rl, rr = load_yuv_sequence(ref.left, W, H), load_yuv_sequence(ref.right, W, H)
    d = root / "dist" / "gaussian_blur_1"
    dl, dr = load_yuv_sequence(d / "left.yuv", W, H), load_yuv_sequence(d / "right.yuv", W, H)
    want = np.mean([(psnr(rl[i], dl[i]) + psnr(rr[i], dr[i])) / 2 for i in range(3)])
    assert float(rows[1]["psnr"]) == pytest.approx(want, rel=1e-12)


def test_batch_planted_mos(dataset, tmp_path):
    root, _ = dataset
    scored = tmp_path / "first"
    assert cli.main(["batch", str(root / "manifest.json"), "--out", str(scored)]) == 0
    pooled = {r["id"]: float(r["hv3d"]) for r in csv.DictReader((scored / "scores.csv").open())}
    planted = {k: 10 * v for k, v in pooled.items()}
    manifest = _subset_manifest(root, set(pooled), tmp_path / "m.json", planted)
    out = tmp_path / "second"
    assert cli.main(["batch", str(manifest), "--out", str(out)]) == 0
    stats = json.loads((out / "report.json").read_text())["statistics"]["metrics"]["hv3d"]
    assert stats["scc"] == pytest.approx(1.0)
    assert stats["pcc"] > 0.99


def test_distort_three_levels(dataset, tmp_path):
    _, ref = dataset
    rc = cli.main(["distort", "--left", str(ref.left), "--right", str(ref.right),
                   "--disp", str(ref.disp_l2r), "--kind", "brightness_shift",
                   "--levels", "10,20,30", "--out", str(tmp_path)] + DIMS)
    assert rc == 0
    sidecars = sorted(tmp_path.glob("*/distortion.json"))
    assert len(sidecars) == 3
    assert len({p.read_text() for p in sidecars}) == 3


def test_timing_tiny_frame(tmp_path):
    clip = make_stereo_clip(64, 64, 1, seed=2)
    ref = write_clip(tmp_path / "r", clip)
    write_dataset_manifest(tmp_path / "m.json", [{"id": "t", "ref": _paths(ref), "dist": _paths(ref),
                                                  "distortion": "none"}],
                           width=64, height=64)
    assert cli.main(["timing", str(tmp_path / "m.json"), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "timing.json").read_text())
    assert report["frames"] == 1
    assert [r["metric"] for r in report["rows"]] == ["psnr", "ssim", "vif", "fast-hv3d", "hv3d"]
    assert all(r["seconds_per_frame"] > 0 for r in report["rows"])
