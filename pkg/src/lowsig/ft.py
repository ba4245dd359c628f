"""Fixed-threshold low-signal correction used as the comparison baseline.

Counts below ``lower_th`` are replaced by their box-car mean, counts above
``upper_th`` by their median; everything in between passes through.  Both
filters read the uncorrected grid, so gated cells never see each other's
replacements.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .errors import ConfigError
from .grid import SinogramGrid, Stage, WindowSpec

POSITIVE_FLOOR = 1e-3


@dataclass(frozen=True)
class FtConfig:
    lower_th: float = 20.0
    upper_th: float = 1e4
    boxcar_window: WindowSpec = field(default_factory=lambda: WindowSpec.from_size((7, 5, 3)))
    median_window: WindowSpec = field(default_factory=lambda: WindowSpec.from_size((3, 3, 3)))
    use_upper: bool = True
    floor: float = POSITIVE_FLOOR

    def __post_init__(self):
        if not self.upper_th > self.lower_th:
            raise ConfigError("upper_th must be greater than lower_th")
        if not self.floor > 0:
            raise ConfigError("floor must be > 0")

    # config-file keys carry an ``ft_`` prefix
    _KEYS = {
        "ft_lower_th": "lower_th",
        "ft_upper_th": "upper_th",
        "ft_boxcar_window": "boxcar_window",
        "ft_median_window": "median_window",
        "ft_use_upper": "use_upper",
        "ft_floor": "floor",
    }

    @classmethod
    def from_dict(cls, d: dict) -> "FtConfig":
        unknown = set(d) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown ft config keys: {sorted(unknown)}")
        kw = {cls._KEYS[k]: v for k, v in d.items()}
        try:
            for key in ("boxcar_window", "median_window"):
                if key in kw:
                    kw[key] = WindowSpec.from_size(kw[key])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**kw)

    def to_dict(self) -> dict:
        inv = {v: k for k, v in self._KEYS.items()}
        d = {inv[f.name]: getattr(self, f.name) for f in fields(self)}
        d["ft_boxcar_window"] = list(self.boxcar_window.size)
        d["ft_median_window"] = list(self.median_window.size)
        return d


def ft_lsc(lam: SinogramGrid, cfg: FtConfig | None = None) -> SinogramGrid:
    cfg = FtConfig() if cfg is None else cfg
    lam.require(Stage.COUNTS)
    x = lam.data
    out = x.copy()
    low = x < cfg.lower_th
    if low.any():
        mean, _ = kernels.local_moments(x, cfg.boxcar_window.half_widths)
        out[low] = mean[low]
    if cfg.use_upper:
        high = x > cfg.upper_th
        if high.any():
            med = kernels.window_median(x, cfg.median_window.half_widths, high)
            out[high] = med[high]
    return lam.derive(np.maximum(out, cfg.floor))
