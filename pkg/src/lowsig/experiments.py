"""Desk-scale evaluation experiments comparing uncorrected, FT and AF data.

Three experiments share one geometry:

``streak``
    water cylinder with two bone inserts at low dose; ROI mean/std in the
    starved region between the inserts and the NPS of flat water patches.
``high_signal``
    water cylinder at high dose; how far AF moves a clean reconstruction.
``wire``
    thin wire in a water body; radial MTF crossings of each method.

The ``run_*`` functions work in memory.  ``lowsig repro`` produces the same
numbers through the file-based stage commands.
"""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .af import AfConfig, af_lsc
from .errors import ConfigError
from .ft import FtConfig, ft_lsc
from .grid import SinogramGrid, Stage
from .metrics import MTF_LEVELS, RoiSpec, mtf_from_psf, nps_2d, nps_integral, radial_average, roi_stats
from .recon import UNCORRECTED_FLOOR, Image, fbp, neg_log
from .simulator import Geometry, NoiseModel, load_phantom, simulate

METHODS = ("none", "ft", "af")

# MTF crossings (cycles/cm) reported for a titanium wire phantom; kept for
# qualitative comparison only, the scanner and phantom are not reproducible.
REFERENCE_MTF = {
    "ft": {"50": 1.61, "10": 5.32, "4": 7.37},
    "af": {"50": 2.14, "10": 6.29, "4": 8.27},
}


def default_config() -> dict:
    return json.loads(resources.files("lowsig").joinpath("data", "repro.json").read_text())


def load_config(path=None) -> dict:
    """Read a repro config; missing top-level sections fall back to the defaults."""
    cfg = default_config()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    for key, val in user.items():
        if key == "experiments":
            for name, exp in val.items():
                base = cfg["experiments"].get(name, {})
                cfg["experiments"][name] = {**base, **exp}
        else:
            cfg[key] = val
    return cfg


def af_config(cfg: dict, sigma_e: float) -> AfConfig:
    d = dict(cfg.get("af", {}))
    d.setdefault("sigma_e", sigma_e)
    return AfConfig.from_dict(d)


def ft_config(cfg: dict) -> FtConfig:
    return FtConfig.from_dict(dict(cfg.get("ft", {})))


def correct(noisy: SinogramGrid, method: str, af_cfg: AfConfig | None = None, ft_cfg: FtConfig | None = None):
    """Apply one correction; ``none`` only floors counts at 1e-3."""
    if method == "af":
        return af_lsc(noisy, af_cfg)
    if method == "ft":
        return ft_lsc(noisy, ft_cfg)
    if method == "none":
        noisy.require(Stage.COUNTS)
        return noisy.derive(np.maximum(noisy.data, UNCORRECTED_FLOOR))
    raise ConfigError(f"unknown correction method {method!r}; expected one of {METHODS}")


def to_projection(counts: SinogramGrid, i0: float) -> SinogramGrid:
    return neg_log(counts, i0, clamp=UNCORRECTED_FLOOR)


def flat_patch_centers(truth: np.ndarray, size: int, count: int, margin: int = 4) -> list[tuple[int, int]]:
    """Top-left corners of ``count`` non-overlapping patches of constant non-zero truth.

    Candidates lie on a ``size``-spaced grid aligned with the image centre and
    are taken nearest-first.
    """
    n = truth.shape[0]
    c = n // 2
    starts = sorted({c - size // 2 + k * size for k in range(-n // size, n // size + 1)})
    cands = []
    for r0 in starts:
        for c0 in starts:
            lo_r, lo_c = r0 - margin, c0 - margin
            hi_r, hi_c = r0 + size + margin, c0 + size + margin
            if lo_r < 0 or lo_c < 0 or hi_r > n or hi_c > truth.shape[1]:
                continue
            block = truth[lo_r:hi_r, lo_c:hi_c]
            if block.max() > 0 and block.min() == block.max():
                dist = (r0 + size / 2 - c) ** 2 + (c0 + size / 2 - c) ** 2
                cands.append((dist, r0, c0))
    cands.sort()
    if len(cands) < count:
        raise ConfigError(f"only {len(cands)} flat {size}x{size} patches available, need {count}")
    return [(r0, c0) for _, r0, c0 in cands[:count]]


def truth_raster(phantom, img: Image) -> np.ndarray:
    xs, ys = img.coords()
    return phantom.image(xs, ys)


def streak_summary(images: dict, phantom, exp: dict) -> tuple[dict, dict]:
    """ROI statistics and NPS of the streak experiment.

    Returns ``(summary, nps_profiles)``.
    """
    ref = next(iter(images.values()))
    roi_cfg = exp["roi"]
    roi = RoiSpec(ref.pixel_of(roi_cfg["x"], roi_cfg["y"]), float(roi_cfg["radius_px"]))
    truth_mu = float(exp["truth_mu"])
    size = int(exp["nps"]["size"])
    corners = flat_patch_centers(truth_raster(phantom, ref), size, int(exp["nps"]["patches"]))
    summary = {"roi": {}, "abs_bias": {}, "nps_integral": {}}
    profiles = {}
    for method, img in images.items():
        mean, std = roi_stats(img, roi)
        summary["roi"][method] = {"mean": mean, "std": std}
        summary["abs_bias"][method] = abs(mean - truth_mu)
        patches = [img.data[r0:r0 + size, c0:c0 + size] for r0, c0 in corners]
        nps = nps_2d(patches, img.pitch)
        summary["nps_integral"][method] = nps_integral(nps, img.pitch)
        profiles[method] = radial_average(nps, img.pitch)
    if "none" in images and "af" in images:
        summary["std_reduction_af_vs_none"] = 1.0 - summary["roi"]["af"]["std"] / summary["roi"]["none"]["std"]
    summary["truth_mu"] = truth_mu
    summary["nps_patches"] = len(corners)
    return summary, profiles


def high_signal_summary(img_none: Image, img_af: Image, phantom, mask_mu: float) -> dict:
    """RMS difference of AF vs uncorrected, relative to the RMS of the uncorrected image."""
    mask = truth_raster(phantom, img_none) > mask_mu
    diff = img_af.data[mask] - img_none.data[mask]
    rel = float(np.sqrt(np.mean(diff ** 2)) / np.sqrt(np.mean(img_none.data[mask] ** 2)))
    return {"rms_rel_diff_af_vs_none": rel, "mask_pixels": int(mask.sum())}


def wire_summary(psfs: dict, pitch: float) -> tuple[dict, dict]:
    """MTF crossings per method from (row-averaged) wire patches."""
    summary = {"crossings": {}, "reference": copy.deepcopy(REFERENCE_MTF), "af_ge_ft": {}}
    profiles = {}
    for method, psf in psfs.items():
        res = mtf_from_psf(psf, pitch)
        summary["crossings"][method] = {_level_key(k): v for k, v in res.crossings.items()}
        summary["nyquist"] = res.nyquist
        profiles[method] = res.profile
    if "af" in psfs and "ft" in psfs:
        for lvl in MTF_LEVELS:
            k = _level_key(lvl)
            a, f = summary["crossings"]["af"][k], summary["crossings"]["ft"][k]
            summary["af_ge_ft"][k] = None if a is None or f is None else bool(a >= f)
    return summary, profiles


def _level_key(level: float) -> str:
    return f"{level * 100:g}"


def _setup(cfg: dict, name: str, seed: int):
    exp = cfg["experiments"][name]
    g = Geometry.from_dict(cfg["geometry"])
    phantom = load_phantom(exp["phantom"])
    nm = NoiseModel(float(exp["i0"]), float(exp["sigma_e"]), int(seed))
    return exp, g, phantom, nm


def _corrected_projections(cfg, exp, noisy, methods):
    afc = af_config(cfg, float(exp["sigma_e"]))
    ftc = ft_config(cfg)
    return {m: to_projection(correct(noisy, m, afc, ftc), float(exp["i0"])) for m in methods}


def run_streak(cfg: dict | None = None, seed: int = 42, methods=METHODS):
    cfg = default_config() if cfg is None else cfg
    exp, g, phantom, nm = _setup(cfg, "streak", seed)
    _, _, noisy = simulate(phantom, g, nm)
    projs = _corrected_projections(cfg, exp, noisy, methods)
    rc = cfg["recon"]
    images = {m: fbp(p, g, n=int(rc["n"]), row=int(exp["row"]), window=rc.get("window", "ramlak")) for m, p in projs.items()}
    summary, profiles = streak_summary(images, phantom, exp)
    return summary, images, profiles


def run_high_signal(cfg: dict | None = None, seed: int = 42):
    cfg = default_config() if cfg is None else cfg
    exp, g, phantom, nm = _setup(cfg, "high_signal", seed)
    _, _, noisy = simulate(phantom, g, nm)
    projs = _corrected_projections(cfg, exp, noisy, ("none", "af"))
    rc = cfg["recon"]
    images = {m: fbp(p, g, n=int(rc["n"]), row=int(exp["row"]), window=rc.get("window", "ramlak")) for m, p in projs.items()}
    return high_signal_summary(images["none"], images["af"], phantom, float(exp["mask_mu"])), images


def wire_psf(projection: SinogramGrid, g: Geometry, phantom, zoom: dict, window: str = "ramlak") -> np.ndarray:
    """Zoomed reconstruction around the wire, averaged over all detector rows."""
    center = phantom.wire.center
    imgs = [
        fbp(projection, g, n=int(zoom["n"]), pitch=float(zoom["pitch"]), row=r, center=center, window=window).data
        for r in range(projection.dims[1])
    ]
    return np.mean(imgs, axis=0)


def run_wire(cfg: dict | None = None, seed: int = 42, methods=METHODS):
    cfg = default_config() if cfg is None else cfg
    exp, g, phantom, nm = _setup(cfg, "wire", seed)
    if phantom.wire is None:
        raise ConfigError("wire experiment needs a phantom with a wire")
    _, _, noisy = simulate(phantom, g, nm)
    projs = _corrected_projections(cfg, exp, noisy, methods)
    window = cfg["recon"].get("window", "ramlak")
    psfs = {m: wire_psf(p, g, phantom, exp["zoom"], window) for m, p in projs.items()}
    summary, profiles = wire_summary(psfs, float(exp["zoom"]["pitch"]))
    return summary, psfs, profiles
