"""``lowsig`` command line: simulate, correct, recon, metrics, repro.

Stages talk to each other only through grid/image files.  Exit codes: 0 on
success, 2 for usage or configuration errors, 3 for data errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, experiments, fileio
from .errors import ConfigError, DataError
from .grid import Stage
from .metrics import MTF_LEVELS, RoiSpec, extract_patch, mtf_from_psf, nps_2d, nps_integral, radial_average, roi_stats
from .recon import UNCORRECTED_FLOOR, fbp, neg_log
from .simulator import Geometry, NoiseModel, load_phantom, simulate

log = logging.getLogger("lowsig")


def _load_json(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _section(cfg: dict, key: str) -> dict:
    if key not in cfg:
        raise ConfigError(f"config is missing the {key!r} section")
    if not isinstance(cfg[key], dict):
        raise ConfigError(f"config field {key!r} must be an object")
    return cfg[key]


def parse_rows(text: str | None, nrows: int) -> list[int]:
    """``"a..b"`` (inclusive) or ``"a"``; ``None`` selects every row."""
    if text is None:
        return list(range(nrows))
    try:
        if ".." in text:
            a, b = (int(t) for t in text.split("..", 1))
        else:
            a = b = int(text)
    except ValueError:
        raise ConfigError(f"bad row selection {text!r}; expected a..b") from None
    if a > b or a < 0 or b >= nrows:
        raise ConfigError(f"row selection {text!r} outside 0..{nrows - 1}")
    return list(range(a, b + 1))


def _dtype(cfg: dict) -> str:
    return cfg.get("io", {}).get("dtype", "f32")


def cmd_simulate(cfg: dict, seed: int | None, out: Path) -> list[Path]:
    noise = dict(_section(cfg, "noise"))
    if seed is not None:
        noise["seed"] = seed
    if "phantom" not in cfg:
        raise ConfigError("config is missing the 'phantom' field")
    phantom = load_phantom(cfg["phantom"])
    g = Geometry.from_dict(_section(cfg, "geometry"))
    try:
        nm = NoiseModel(float(noise["i0"]), float(noise.get("sigma_e", 0.0)), int(noise.get("seed", 0)))
    except KeyError as exc:
        raise ConfigError(f"noise section is missing {exc}") from None
    proj, ideal, noisy = simulate(phantom, g, nm)
    dtype = _dtype(cfg)
    outputs = [
        fileio.write_grid(out / "projection", proj, dtype),
        fileio.write_grid(out / "ideal_counts", ideal, dtype),
        fileio.write_grid(out / "noisy_counts", noisy, dtype),
    ]
    fileio.append_manifest(out, "simulate", cfg, nm.seed, [str(cfg["phantom"])], outputs)
    return outputs


def cmd_correct(cfg: dict, src: Path, method: str, out: Path) -> Path:
    grid = fileio.read_grid(src)
    if grid.stage != Stage.COUNTS:
        raise DataError(f"{src}: expected a counts grid, got {grid.stage.value}")
    sigma_e = float(cfg.get("noise", {}).get("sigma_e", 0.0))
    afc = experiments.af_config(cfg, sigma_e) if method == "af" else None
    ftc = experiments.ft_config(cfg) if method == "ft" else None
    corrected = experiments.correct(grid, method, afc, ftc)
    path = fileio.write_grid(out / "corrected_counts", corrected, _dtype(cfg))
    fileio.append_manifest(out, f"correct:{method}", cfg, None, [src], [path])
    return path


def cmd_recon(cfg: dict, src: Path, rows: str | None, out: Path, clamp: bool = True) -> list[Path]:
    grid = fileio.read_grid(src)
    g = Geometry.from_dict(_section(cfg, "geometry"))
    if grid.dims != g.dims:
        raise DataError(f"{src}: grid dims {grid.dims} do not match geometry {g.dims}")
    if grid.stage == Stage.COUNTS:
        i0 = float(_section(cfg, "noise").get("i0", 0.0))
        grid = neg_log(grid, i0, clamp=UNCORRECTED_FLOOR if clamp else None)
    elif grid.stage != Stage.PROJECTION:
        raise DataError(f"{src}: cannot reconstruct a {grid.stage.value} grid")
    rc = cfg.get("recon", {})
    n = int(rc.get("n", 512))
    pitch = rc.get("pitch")
    center = tuple(rc.get("center", (0.0, 0.0)))
    window = rc.get("window", "ramlak")
    outputs = []
    for r in parse_rows(rows, g.rows):
        img = fbp(grid, g, n=n, pitch=pitch, row=r, center=center, window=window)
        outputs.append(fileio.write_image(out / f"image_row{r:03d}", img, _dtype(cfg), {"row": r}))
    fileio.append_manifest(out, "recon", cfg, None, [src], outputs)
    return outputs


def _roi_from_cfg(img, d: dict) -> RoiSpec:
    if "bounds" in d:
        return RoiSpec(bounds=tuple(d["bounds"]))
    if "x" in d:
        return RoiSpec(img.pixel_of(float(d["x"]), float(d["y"])), float(d["radius_px"]))
    return RoiSpec(tuple(d["center"]), float(d["radius"]))


def cmd_metrics(cfg: dict, images: list[Path], out: Path) -> list[Path]:
    """ROI stats per image; NPS pooled over every image's patches; MTF of the mean wire patch."""
    if not images:
        raise ConfigError("metrics needs at least one --image")
    mcfg = _section(cfg, "metrics")
    imgs = [fileio.read_image(p) for p in images]
    outputs = []
    if mcfg.get("rois"):
        rows = []
        for path, img in zip(images, imgs):
            for k, d in enumerate(mcfg["rois"]):
                mean, std = roi_stats(img, _roi_from_cfg(img, d))
                rows.append([Path(path).stem, k, mean, std])
        outputs.append(fileio.write_csv(out / "roi_stats.csv", ["image", "roi", "mean", "std"], rows))
    if mcfg.get("nps"):
        d = mcfg["nps"]
        size = int(d["size"])
        if "corners" in d:
            corners = [tuple(c) for c in d["corners"]]
        else:
            truth = experiments.truth_raster(load_phantom(d["phantom"]), imgs[0])
            corners = experiments.flat_patch_centers(truth, size, int(d["patches"]))
        patches = [img.data[r0:r0 + size, c0:c0 + size] for img in imgs for r0, c0 in corners]
        nps = nps_2d(patches, imgs[0].pitch)
        prof = radial_average(nps, imgs[0].pitch)
        outputs.append(fileio.write_csv(
            out / "nps_profile.csv", ["frequency_cm_inv", "value"], zip(prof.frequencies, prof.values)))
        outputs.append(fileio.write_csv(
            out / "nps_integral.csv", ["quantity", "value"], [["integral", nps_integral(nps, imgs[0].pitch)]]))
    if mcfg.get("wire"):
        d = mcfg["wire"]
        size = int(d.get("size", 64))
        if "x" in d:
            center = imgs[0].pixel_of(float(d["x"]), float(d["y"]))
        else:
            center = tuple(d.get("center", ((imgs[0].n - 1) / 2.0, (imgs[0].n - 1) / 2.0)))
        psf = np.mean([extract_patch(img.data, center, size) if img.n > size else img.data for img in imgs], axis=0)
        res = mtf_from_psf(psf, imgs[0].pitch)
        outputs.append(fileio.write_csv(
            out / "mtf_profile.csv", ["frequency_cm_inv", "value"], zip(res.profile.frequencies, res.profile.values)))
        outputs.append(fileio.write_csv(
            out / "mtf_crossings.csv", ["level", "frequency_cm_inv"],
            [[f"{lvl * 100:g}", res.crossings[lvl]] for lvl in MTF_LEVELS]))
    fileio.append_manifest(out, "metrics", cfg, None, images, outputs)
    return outputs


def _stage_config(cfg: dict, exp: dict, seed: int) -> dict:
    return {
        "phantom": exp["phantom"],
        "geometry": cfg["geometry"],
        "noise": {"i0": exp["i0"], "sigma_e": exp["sigma_e"], "seed": seed},
        "af": cfg.get("af", {}),
        "ft": cfg.get("ft", {}),
        "recon": cfg["recon"],
        "io": cfg.get("io", {}),
    }


def _write_config(path: Path, cfg: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return path


def _run_stages(cfg: dict, exp: dict, name: str, seed: int, out: Path, methods, rows: str | None, recon=None):
    base = out / name
    stage_cfg = _stage_config(cfg, exp, seed)
    if recon is not None:
        stage_cfg = {**stage_cfg, "recon": {**stage_cfg["recon"], **recon}}
    _write_config(base / "config.json", stage_cfg)
    cmd_simulate(stage_cfg, seed, base / "simulate")
    images = {}
    for m in methods:
        corrected = cmd_correct(stage_cfg, base / "simulate" / "noisy_counts.json", m, base / f"correct_{m}")
        images[m] = cmd_recon(stage_cfg, corrected, rows, base / f"recon_{m}")
    return base, stage_cfg, images


def _profile_rows(profiles: dict):
    for method, prof in profiles.items():
        for f, v in zip(prof.frequencies, prof.values):
            yield [method, f, v]


def cmd_repro(cfg: dict, seed: int, out: Path, only=None) -> dict:
    """Run every experiment through the file-based stages and write the summary."""
    t0 = time.perf_counter()
    names = only or list(cfg["experiments"])
    unknown = [n for n in names if n not in cfg["experiments"]]
    if unknown:
        raise ConfigError(f"unknown experiment(s) {unknown}; available: {sorted(cfg['experiments'])}")
    summary = {"seed": seed, "version": __version__}
    timing = {}
    for name in names:
        t = time.perf_counter()
        exp = cfg["experiments"][name]
        phantom = load_phantom(exp["phantom"])
        if name == "streak":
            base, _, paths = _run_stages(cfg, exp, name, seed, out, experiments.METHODS, str(exp["row"]))
            images = {m: fileio.read_image(p[0]) for m, p in paths.items()}
            summary[name], profiles = experiments.streak_summary(images, phantom, exp)
            fileio.write_csv(base / "nps_profiles.csv", ["method", "frequency_cm_inv", "value"], _profile_rows(profiles))
            metrics_cfg = {"metrics": {
                "rois": [exp["roi"]],
                "nps": {"phantom": exp["phantom"], **exp["nps"]},
            }}
            for m, p in paths.items():
                cmd_metrics(metrics_cfg, p, base / f"metrics_{m}")
        elif name == "high_signal":
            base, _, paths = _run_stages(cfg, exp, name, seed, out, ("none", "af"), str(exp["row"]))
            images = {m: fileio.read_image(p[0]) for m, p in paths.items()}
            summary[name] = experiments.high_signal_summary(images["none"], images["af"], phantom, float(exp["mask_mu"]))
        elif name == "wire":
            if phantom.wire is None:
                raise ConfigError("wire experiment needs a phantom with a wire")
            zoom = {"n": exp["zoom"]["n"], "pitch": exp["zoom"]["pitch"], "center": list(phantom.wire.center)}
            base, _, paths = _run_stages(cfg, exp, name, seed, out, experiments.METHODS, None, recon=zoom)
            psfs = {m: np.mean([fileio.read_image(q).data for q in p], axis=0) for m, p in paths.items()}
            summary[name], profiles = experiments.wire_summary(psfs, float(exp["zoom"]["pitch"]))
            fileio.write_csv(base / "mtf_profiles.csv", ["method", "frequency_cm_inv", "value"], _profile_rows(profiles))
            for m, p in paths.items():
                cmd_metrics({"metrics": {"wire": {"size": int(exp["zoom"]["n"])}}}, p, base / f"metrics_{m}")
        else:
            raise ConfigError(f"unknown experiment {name!r}")
        timing[name] = time.perf_counter() - t
        log.info("%s done in %.1f s", name, timing[name])
    timing["total"] = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "summary.md").write_text(render_summary(summary))
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    fileio.append_manifest(out, "repro", cfg, seed, [], [out / "summary.json", out / "summary.md"])
    return summary


def _fmt(v, spec=".4g"):
    return "n/a" if v is None else format(v, spec)


def render_summary(s: dict) -> str:
    lines = [f"# lowsig reproduction summary (seed {s['seed']})", ""]
    if "streak" in s:
        st = s["streak"]
        lines += [
            "## Streak / bias (water + bone inserts, low dose)",
            "",
            "| method | ROI mean (1/cm) | ROI std (1/cm) | abs bias | NPS integral |",
            "|---|---|---|---|---|",
        ]
        for m in st["roi"]:
            lines.append(
                f"| {m} | {_fmt(st['roi'][m]['mean'])} | {_fmt(st['roi'][m]['std'])} | "
                f"{_fmt(st['abs_bias'][m])} | {_fmt(st['nps_integral'][m])} |"
            )
        if "std_reduction_af_vs_none" in st:
            lines += ["", f"AF ROI std reduction vs uncorrected: {st['std_reduction_af_vs_none'] * 100:.1f} %"]
        lines.append("")
    if "high_signal" in s:
        lines += [
            "## High signal passthrough",
            "",
            f"RMS relative difference AF vs uncorrected: {s['high_signal']['rms_rel_diff_af_vs_none'] * 100:.3f} %",
            "",
        ]
    if "wire" in s:
        w = s["wire"]
        lines += [
            "## Wire MTF crossings (cycles/cm)",
            "",
            "| level | none | FT | AF | AF >= FT | reference FT | reference AF |",
            "|---|---|---|---|---|---|---|",
        ]
        for k in ("50", "10", "4"):
            c = w["crossings"]
            lines.append(
                f"| {k}% | {_fmt(c.get('none', {}).get(k), '.2f')} | {_fmt(c['ft'][k], '.2f')} | "
                f"{_fmt(c['af'][k], '.2f')} | {w['af_ge_ft'].get(k)} | {w['reference']['ft'][k]} | "
                f"{w['reference']['af'][k]} |"
            )
        lines += ["", "Reference values come from a different scanner and phantom; only the ordering is comparable.", ""]
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowsig", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lowsig {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="phantom -> projection, ideal and noisy count grids")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)

    c = sub.add_parser("correct", help="apply a low-signal correction to a counts grid")
    c.add_argument("--in", dest="src", required=True)
    c.add_argument("--method", choices=experiments.METHODS, required=True)
    c.add_argument("--config")
    c.add_argument("--out", required=True)

    r = sub.add_parser("recon", help="negative log + FBP of selected rows")
    r.add_argument("--in", dest="src", required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--rows")
    r.add_argument("--no-clamp", action="store_true", help="fail on non-positive counts instead of flooring them")
    r.add_argument("--out", required=True)

    m = sub.add_parser("metrics", help="ROI stats, NPS and wire MTF as CSV")
    m.add_argument("--image", action="append", required=True)
    m.add_argument("--config", required=True)
    m.add_argument("--out", required=True)

    rp = sub.add_parser("repro", help="run the full comparison and write a summary")
    rp.add_argument("--config")
    rp.add_argument("--seed", type=int, default=42)
    rp.add_argument("--only", action="append", help="run just this experiment (repeatable)")
    rp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        out = Path(args.out)
        if args.command == "simulate":
            for path in cmd_simulate(_load_json(args.config), args.seed, out):
                print(path)
        elif args.command == "correct":
            print(cmd_correct(_load_json(args.config), Path(args.src), args.method, out))
        elif args.command == "recon":
            for path in cmd_recon(_load_json(args.config), Path(args.src), args.rows, out, clamp=not args.no_clamp):
                print(path)
        elif args.command == "metrics":
            for path in cmd_metrics(_load_json(args.config), [Path(p) for p in args.image], out):
                print(path)
        elif args.command == "repro":
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cmd_repro(experiments.load_config(args.config), args.seed, out, args.only)
            print(out / "summary.md")
    except ConfigError as exc:
        print(f"lowsig: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError) as exc:
        print(f"lowsig: data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
