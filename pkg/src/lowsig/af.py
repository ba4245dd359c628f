"""Adaptive-filtering low-signal correction.

The pipeline runs on raw photon counts:

1. shrink-window local mean and standard deviation of the raw counts,
2. LLMMSE blend of low-count cells towards their local mean,
3. Anscombe transform ``2 sqrt(x + 3/8)``,
4. bilateral filter whose spatial width shrinks as ``K1 / mean`` and whose
   range width follows ``K2 * std``,
5. closed-form unbiased inverse Anscombe transform,
6. exponential mapping of small values to strictly positive counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .errors import ConfigError
from .grid import SinogramGrid, Stage, WindowSpec, local_stats

VST_MIN = 2.0 * math.sqrt(3.0 / 8.0)
_SQRT_3_2 = math.sqrt(1.5)


@dataclass(frozen=True)
class AfConfig:
    """Parameters of the adaptive filter.

    ``lambda_th`` defaults to ``max(10, 3 * sigma_e)`` when left as ``None``.
    ``sigma_r_mode`` selects how the counts-domain local std becomes a range
    width in VST units: ``"vst"`` divides by the local Anscombe slope
    ``sqrt(mean + 3/8)``, ``"raw"`` uses ``K2 * std`` unconverted.
    """

    sigma_e: float = 0.0
    lambda_th: float | None = None
    lambda_th_prime: float = 1.0
    k1: float = 400.0
    k2: float = 5.0
    stats_window: WindowSpec = field(default_factory=lambda: WindowSpec.from_size((7, 5, 3)))
    bf_window: WindowSpec = field(default_factory=lambda: WindowSpec.from_size((13, 7, 3)))
    mu_floor: float = 1.0
    sigma_r_floor: float = 0.05
    sigma_r_mode: str = "vst"

    def __post_init__(self):
        if self.lambda_th is None:
            object.__setattr__(self, "lambda_th", max(10.0, 3.0 * self.sigma_e))
        checks = [
            (self.sigma_e >= 0, "sigma_e must be >= 0"),
            (self.lambda_th_prime > 0, "lambda_th_prime must be > 0"),
            (self.k1 > 0, "k1 must be > 0"),
            (self.k2 > 0, "k2 must be > 0"),
            (self.mu_floor > 0, "mu_floor must be > 0"),
            (self.sigma_r_floor > 0, "sigma_r_floor must be > 0"),
            (self.sigma_r_mode in ("vst", "raw"), "sigma_r_mode must be 'vst' or 'raw'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, d: dict) -> "AfConfig":
        """Build from the config-file keys (windows given as full odd sizes)."""
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown af config keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            for key in ("stats_window", "bf_window"):
                if key in kw:
                    kw[key] = WindowSpec.from_size(kw[key])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["stats_window"] = list(self.stats_window.size)
        d["bf_window"] = list(self.bf_window.size)
        return d


@dataclass(frozen=True)
class AdaptiveParams:
    """Per-cell spatial width (index units) and range width (VST units)."""

    sigma_d: np.ndarray
    sigma_r: np.ndarray


def llmmse_correct(lam: SinogramGrid, lam_av: SinogramGrid, cfg: AfConfig) -> SinogramGrid:
    """Blend cells with ``lam <= lambda_th`` towards their local mean.

    ``eta = av / (av + sigma_e**2)`` with the local mean floored at 0; with
    no electronic noise the blend is the identity.
    """
    lam.require(Stage.COUNTS)
    x = lam.data
    av = np.maximum(lam_av.data, 0.0)
    var_e = cfg.sigma_e ** 2
    if var_e == 0.0:
        eta = np.ones_like(av)
    else:
        eta = av / (av + var_e)
    blended = eta * x + (1.0 - eta) * lam_av.data
    return lam.derive(np.where(x <= cfg.lambda_th, blended, x))


def vst_forward(lam: SinogramGrid) -> SinogramGrid:
    lam.require(Stage.COUNTS)
    return lam.derive(2.0 * np.sqrt(np.maximum(lam.data + 0.375, 0.0)), Stage.VST)


def adaptive_params(mu: SinogramGrid, sigma: SinogramGrid, cfg: AfConfig) -> AdaptiveParams:
    mu_f = np.maximum(mu.data, cfg.mu_floor)
    sigma_d = cfg.k1 / mu_f
    if cfg.sigma_r_mode == "vst":
        sigma_vst = sigma.data / np.sqrt(mu_f + 0.375)
    else:
        sigma_vst = sigma.data
    sigma_r = np.maximum(cfg.k2 * sigma_vst, cfg.sigma_r_floor)
    return AdaptiveParams(sigma_d, sigma_r)


def bilateral_filter(x: SinogramGrid, p: AdaptiveParams, w: WindowSpec) -> SinogramGrid:
    """Edge-preserving weighted mean over the clipped window.

    The weight of neighbour ``j`` of cell ``i`` is
    ``exp(-|i-j| / sigma_d[i]) * exp(-|x[i]-x[j]| / sigma_r[i])`` with
    ``|i-j|`` the Euclidean length of the integer offset.  An infinite
    ``sigma_r`` turns off the range term.
    """
    x.require(Stage.VST)
    if p.sigma_d.shape != x.data.shape or p.sigma_r.shape != x.data.shape:
        raise ValueError("adaptive parameter grids must match the sinogram dims")
    return x.derive(kernels.bilateral(x.data, p.sigma_d, p.sigma_r, w.half_widths))


def vst_inverse(y: SinogramGrid) -> SinogramGrid:
    """Closed-form unbiased inverse Anscombe transform; values below ``2 sqrt(3/8)`` map to 0."""
    y.require(Stage.VST)
    v = y.data
    ok = v >= VST_MIN
    t = np.where(ok, v, 1.0)
    inv = (
        0.25 * t ** 2
        + 0.25 * _SQRT_3_2 / t
        - 1.375 / t ** 2
        + 0.625 * _SQRT_3_2 / t ** 3
        - 0.125
    )
    # the closed form is increasing on [VST_MIN, inf) and 0 at VST_MIN up to rounding
    return y.derive(np.where(ok, np.maximum(inv, 0.0), 0.0), Stage.COUNTS)


def positivity_map(lam: SinogramGrid, lambda_th_prime: float) -> SinogramGrid:
    """Map values below the knee through ``k * exp(x / k - 1)``; C1 at ``x = k``."""
    lam.require(Stage.COUNTS)
    if not lambda_th_prime > 0:
        raise ConfigError("lambda_th_prime must be > 0")
    k = float(lambda_th_prime)
    x = lam.data
    low = x < k
    # the floor only matters for inputs below about -700 k, where exp underflows
    mapped = np.maximum(k * np.exp(np.minimum(x, k) / k - 1.0), np.finfo(np.float64).tiny)
    return lam.derive(np.where(low, mapped, x))


def af_lsc(lam: SinogramGrid, cfg: AfConfig | None = None, return_stages: bool = False):
    """Run the full adaptive-filtering correction on a raw counts grid.

    With ``return_stages`` a dict of every intermediate grid is returned as
    well, keyed ``mean, std, llmmse, vst, bf, ivst, out``.
    """
    cfg = AfConfig() if cfg is None else cfg
    lam.require(Stage.COUNTS)
    stats = local_stats(lam, cfg.stats_window)
    lm = llmmse_correct(lam, stats.mean, cfg)
    y = vst_forward(lm)
    params = adaptive_params(stats.mean, stats.std, cfg)
    bf = bilateral_filter(y, params, cfg.bf_window)
    inv = vst_inverse(bf)
    out = positivity_map(inv, cfg.lambda_th_prime)
    if return_stages:
        stages = dict(mean=stats.mean, std=stats.std, llmmse=lm, vst=y, bf=bf, ivst=inv, out=out)
        return out, stages
    return out
