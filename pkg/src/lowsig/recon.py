"""Negative-log conversion and parallel-beam filtered backprojection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .grid import SinogramGrid, Stage
from .simulator import Geometry

UNCORRECTED_FLOOR = 1e-3


@dataclass(frozen=True)
class Image:
    """Square slice in 1/cm.

    ``data[iy, ix]`` sits at ``x = cx + (ix - (n-1)/2) * pitch`` and
    ``y = cy + (iy - (n-1)/2) * pitch``.
    """

    data: np.ndarray
    pitch: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] < 1:
            raise ValueError(f"image must be a non-empty square array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite values")
        if not self.pitch > 0:
            raise ValueError("pixel pitch must be > 0")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def coords(self):
        off = (np.arange(self.n) - (self.n - 1) / 2.0) * self.pitch
        return self.center[0] + off, self.center[1] + off

    def pixel_of(self, x: float, y: float) -> tuple[float, float]:
        """Fractional ``(row, col)`` of the point ``(x, y)`` in cm."""
        half = (self.n - 1) / 2.0
        return (y - self.center[1]) / self.pitch + half, (x - self.center[0]) / self.pitch + half


def neg_log(lam: SinogramGrid, i0: float, clamp: float | None = None) -> SinogramGrid:
    """Line-integral estimates ``-ln(lam / i0)``.

    Non-positive counts raise :class:`DataError` unless ``clamp`` is given, in
    which case counts are first floored at ``clamp``.
    """
    lam.require(Stage.COUNTS)
    if not i0 > 0:
        raise ConfigError("i0 must be > 0")
    x = lam.data
    if clamp is not None:
        if not clamp > 0:
            raise ConfigError("clamp floor must be > 0")
        x = np.maximum(x, clamp)
    elif np.any(x <= 0):
        bad = tuple(int(i) for i in np.argwhere(x <= 0)[0])
        raise DataError(f"non-positive count {x[bad]!r} at (channel, row, view) index {bad}")
    return lam.derive(-np.log(x / i0), Stage.PROJECTION)


def padded_length(channels: int) -> int:
    return max(64, 1 << int(math.ceil(math.log2(2 * channels))))


def ramp_response(channels: int, window: str = "ramlak") -> np.ndarray:
    """Frequency response of the band-limited ramp on the padded grid.

    Built as the FFT of the sampled spatial ramp kernel (1/4 at 0,
    ``-1/(pi n)^2`` at odd n), which keeps the DC term exact.
    """
    size = padded_length(channels)
    n = np.concatenate([np.arange(0, size // 2 + 1), np.arange(-(size // 2) + 1, 0)])
    h = np.zeros(size)
    h[0] = 0.25
    odd = n % 2 == 1
    h[odd] = -1.0 / (np.pi * n[odd]) ** 2
    resp = np.real(np.fft.fft(h))
    if window == "hann":
        f = np.fft.fftfreq(size)
        resp = resp * 0.5 * (1.0 + np.cos(2.0 * np.pi * f))
    elif window != "ramlak":
        raise ConfigError(f"unknown reconstruction filter {window!r}")
    return resp


def filter_views(proj: np.ndarray, pitch: float, window: str = "ramlak") -> np.ndarray:
    """Ramp-filter a ``(channels, views)`` sinogram slice; returns ``(views, channels)``."""
    C = proj.shape[0]
    resp = ramp_response(C, window)
    size = resp.shape[0]
    padded = np.zeros((proj.shape[1], size))
    padded[:, :C] = proj.T
    q = np.real(np.fft.ifft(np.fft.fft(padded, axis=1) * resp, axis=1))[:, :C]
    return q / pitch


def fbp(
    sino,
    g: Geometry,
    n: int = 512,
    pitch: float | None = None,
    row: int = 0,
    center: tuple[float, float] = (0.0, 0.0),
    window: str = "ramlak",
) -> Image:
    """Reconstruct one detector row.

    ``sino`` is a projection-stage :class:`SinogramGrid` (``row`` selects the
    slice) or a ``(channels, views)`` array.  Pixels outside the field of
    view circle are set to 0.
    """
    if isinstance(sino, SinogramGrid):
        sino.require(Stage.PROJECTION)
        if not 0 <= row < sino.dims[1]:
            raise ConfigError(f"row {row} outside 0..{sino.dims[1] - 1}")
        proj = sino.data[:, row, :]
    else:
        proj = np.asarray(sino, dtype=np.float64)
    if proj.shape != (g.channels, g.views):
        raise ConfigError(f"sinogram slice shape {proj.shape} does not match geometry {(g.channels, g.views)}")
    if g.views < 2:
        raise ConfigError("filtered backprojection needs at least 2 views")
    if g.channels < 2:
        raise ConfigError("filtered backprojection needs at least 2 channels")
    if n < 1:
        raise ConfigError("image size must be >= 1")
    pitch = 2.0 * g.fov_radius / n if pitch is None else float(pitch)
    q = filter_views(proj, g.pitch, window)
    th = g.theta
    img = Image(np.zeros((n, n)), pitch, center)
    xs, ys = img.coords()
    data = kernels.backproject(q, np.cos(th), np.sin(th), xs, ys, g.pitch)
    data *= math.pi / g.views
    outside = xs[None, :] ** 2 + ys[:, None] ** 2 > g.fov_radius ** 2
    data[outside] = 0.0
    return Image(data, pitch, center)
