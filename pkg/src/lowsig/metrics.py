"""Image-quality measurements: ROI statistics, noise power spectrum, wire MTF.

Frequencies are reported in cycles per cm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

MTF_LEVELS = (0.5, 0.1, 0.04)


@dataclass(frozen=True)
class RoiSpec:
    """Disc ROI (``radius`` set) or inclusive rectangle ``(row0, row1, col0, col1)`` in pixels."""

    center: tuple[float, float] | None = None
    radius: float | None = None
    bounds: tuple[int, int, int, int] | None = None

    def mask(self, shape) -> np.ndarray:
        ny, nx = shape
        if self.bounds is not None:
            r0, r1, c0, c1 = (int(b) for b in self.bounds)
            if not (0 <= r0 <= r1 < ny and 0 <= c0 <= c1 < nx):
                raise ConfigError(f"rectangle ROI {self.bounds} not inside image {shape}")
            m = np.zeros(shape, dtype=bool)
            m[r0:r1 + 1, c0:c1 + 1] = True
            return m
        if self.center is None or self.radius is None or self.radius < 0:
            raise ConfigError("ROI needs either bounds or a centre and non-negative radius")
        cy, cx = self.center
        r = self.radius
        if cy - r < -0.5 or cx - r < -0.5 or cy + r > ny - 0.5 or cx + r > nx - 0.5:
            raise ConfigError(f"disc ROI centre {self.center} radius {r} not inside image {shape}")
        yy, xx = np.mgrid[:ny, :nx]
        m = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        if not m.any():
            raise ConfigError("ROI contains no pixel centres")
        return m


@dataclass(frozen=True)
class RadialProfile:
    frequencies: np.ndarray
    values: np.ndarray
    counts: np.ndarray


def roi_stats(img, roi: RoiSpec) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation of the pixels inside ``roi``."""
    data = getattr(img, "data", img)
    vals = np.asarray(data, dtype=np.float64)[roi.mask(np.shape(data))]
    mean = float(vals.mean())
    std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return mean, std


def radial_average(values: np.ndarray, pitch: float, max_freq: float | None = None) -> RadialProfile:
    """Average an unshifted 2-D spectrum over annuli one frequency step wide."""
    ny, nx = values.shape
    fy = np.fft.fftfreq(ny, d=pitch)
    fx = np.fft.fftfreq(nx, d=pitch)
    fr = np.hypot(fy[:, None], fx[None, :])
    step = 1.0 / (min(ny, nx) * pitch)
    bins = np.rint(fr / step).astype(int)
    nyq = 0.5 / pitch if max_freq is None else max_freq
    kmax = int(np.floor(nyq / step + 1e-9))
    keep = bins <= kmax
    counts = np.bincount(bins[keep], minlength=kmax + 1)
    sums = np.bincount(bins[keep], weights=values[keep], minlength=kmax + 1)
    ok = counts > 0
    k = np.arange(kmax + 1)[ok]
    return RadialProfile(k * step, sums[ok] / counts[ok], counts[ok])


def _patch_stack(patches) -> np.ndarray:
    shapes = {np.shape(p) for p in patches}
    if len(shapes) != 1:
        raise DataError(f"NPS patches must share one shape, got {sorted(shapes)}")
    stack = np.asarray(patches, dtype=np.float64)
    if stack.ndim != 3:
        raise DataError("NPS patches must be 2-D")
    if stack.shape[0] < 8:
        raise DataError(f"NPS needs at least 8 patches, got {stack.shape[0]}")
    return stack


def nps_2d(patches, pitch: float) -> np.ndarray:
    """Ensemble 2-D noise power spectrum (unshifted), in value^2 * cm^2.

    The ensemble-mean patch is subtracted first; the ``n/(n-1)`` factor
    undoes the variance that subtraction removes.
    """
    stack = _patch_stack(patches)
    n, ny, nx = stack.shape
    resid = stack - stack.mean(axis=0)
    power = np.abs(np.fft.fft2(resid)) ** 2
    return power.mean(axis=0) * (pitch * pitch / (ny * nx)) * (n / (n - 1))


def nps_integral(nps: np.ndarray, pitch: float) -> float:
    """Integral of a 2-D NPS over frequency; equals the pixel variance."""
    ny, nx = nps.shape
    return float(nps.sum() / (ny * pitch * nx * pitch))


def nps_radial(patches, pitch: float) -> RadialProfile:
    return radial_average(nps_2d(patches, pitch), pitch)


@dataclass(frozen=True)
class MtfResult:
    profile: RadialProfile
    crossings: dict
    nyquist: float


def _crossing(freqs, vals, level):
    below = np.nonzero(vals < level)[0]
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(freqs[0])
    f0, f1 = freqs[k - 1], freqs[k]
    v0, v1 = vals[k - 1], vals[k]
    return float(f0 + (v0 - level) * (f1 - f0) / (v0 - v1))


def mtf_from_psf(psf: np.ndarray, pitch: float, annulus=None) -> MtfResult:
    """Radial MTF of a point-spread patch.

    The mean of the background annulus (pixel radii ``annulus``, default the
    outer quarter of the patch) is subtracted and remaining negatives are
    clamped to 0 before the transform.  Crossings of 50/10/4 % are linearly
    interpolated between bins; ``None`` marks a level not reached below
    Nyquist.
    """
    psf = np.asarray(psf, dtype=np.float64)
    ny, nx = psf.shape
    cy, cx = (ny - 1) / 2.0, (nx - 1) / 2.0
    half = min(ny, nx) / 2.0
    r_in, r_out = annulus if annulus is not None else (0.75 * half, half)
    yy, xx = np.mgrid[:ny, :nx]
    rr = np.hypot(yy - cy, xx - cx)
    ring = (rr >= r_in) & (rr <= r_out)
    bg = psf[ring].mean() if ring.any() else 0.0
    work = np.maximum(psf - bg, 0.0)
    total = work.sum()
    if not total > 0:
        raise DataError("PSF has no positive signal; wire not found")
    mag = np.abs(np.fft.fft2(work))
    prof = radial_average(mag, pitch)
    prof = RadialProfile(prof.frequencies, prof.values / prof.values[0], prof.counts)
    crossings = {lvl: _crossing(prof.frequencies, prof.values, lvl) for lvl in MTF_LEVELS}
    return MtfResult(prof, crossings, 0.5 / pitch)


def extract_patch(data: np.ndarray, center, size: int = 64) -> np.ndarray:
    """Square ``size`` patch whose centre pixel is the rounded ``center`` (row, col)."""
    cy, cx = (int(round(c)) for c in center)
    r0, c0 = cy - size // 2, cx - size // 2
    ny, nx = data.shape
    if r0 < 0 or c0 < 0 or r0 + size > ny or c0 + size > nx:
        raise ConfigError(f"{size}x{size} patch around {center} leaves the image")
    return data[r0:r0 + size, c0:c0 + size]


def mtf_from_wire(img, wire_center, pitch: float | None = None, size: int = 64) -> MtfResult:
    """Wire MTF from a reconstructed image; ``wire_center`` is (row, col) in pixels."""
    data = getattr(img, "data", img)
    pitch = getattr(img, "pitch", None) if pitch is None else pitch
    if pitch is None:
        raise ConfigError("pixel pitch required")
    return mtf_from_psf(extract_patch(np.asarray(data), wire_center, size), pitch)
