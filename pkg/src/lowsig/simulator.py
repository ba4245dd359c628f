"""Analytic parallel-beam phantoms, Beer-Lambert counts and detector noise."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import rng
from .errors import ConfigError
from .grid import SinogramGrid, Stage


@dataclass(frozen=True)
class Ellipse:
    """Ellipse with centre/semi-axes in cm, rotation in radians, attenuation in 1/cm."""

    center: tuple[float, float]
    axes: tuple[float, float]
    angle: float
    mu: float

    def __post_init__(self):
        if min(self.axes) <= 0:
            raise ConfigError(f"ellipse semi-axes must be positive, got {self.axes}")
        if not math.isfinite(self.mu):
            raise ConfigError("ellipse attenuation must be finite")

    @property
    def extent(self) -> float:
        return math.hypot(*self.center) + max(self.axes)


@dataclass(frozen=True)
class Wire:
    center: tuple[float, float]
    radius: float
    mu: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError(f"wire radius must be positive, got {self.radius}")
        if not math.isfinite(self.mu):
            raise ConfigError("wire attenuation must be finite")

    def as_ellipse(self) -> Ellipse:
        return Ellipse(self.center, (self.radius, self.radius), 0.0, self.mu)


@dataclass(frozen=True)
class Phantom:
    """Sum of ellipses (attenuations add where they overlap) plus an optional wire."""

    ellipses: tuple[Ellipse, ...]
    wire: Wire | None = None
    name: str = ""

    def shapes(self) -> list[Ellipse]:
        shapes = list(self.ellipses)
        if self.wire is not None:
            shapes.append(self.wire.as_ellipse())
        return shapes

    def scaled(self, factor: float) -> "Phantom":
        ell = tuple(Ellipse(e.center, e.axes, e.angle, e.mu * factor) for e in self.ellipses)
        wire = None if self.wire is None else Wire(self.wire.center, self.wire.radius, self.wire.mu * factor)
        return Phantom(ell, wire, self.name)

    def rotated(self, theta: float) -> "Phantom":
        """Rotate the whole scene counter-clockwise by ``theta`` about the isocentre."""
        c, s = math.cos(theta), math.sin(theta)

        def rot(p):
            return (c * p[0] - s * p[1], s * p[0] + c * p[1])

        ell = tuple(Ellipse(rot(e.center), e.axes, e.angle + theta, e.mu) for e in self.ellipses)
        wire = None if self.wire is None else Wire(rot(self.wire.center), self.wire.radius, self.wire.mu)
        return Phantom(ell, wire, self.name)

    def image(self, xs, ys) -> np.ndarray:
        """Rasterise the attenuation map at pixel centres (rows follow ``ys``)."""
        X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float))
        out = np.zeros_like(X)
        for e in self.shapes():
            c, s = math.cos(e.angle), math.sin(e.angle)
            dx, dy = X - e.center[0], Y - e.center[1]
            u = (dx * c + dy * s) / e.axes[0]
            v = (-dx * s + dy * c) / e.axes[1]
            out += np.where(u * u + v * v <= 1.0, e.mu, 0.0)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Phantom":
        try:
            ellipses = tuple(
                Ellipse(
                    (float(e["center"][0]), float(e["center"][1])),
                    (float(e["axes"][0]), float(e["axes"][1])),
                    float(e.get("angle", 0.0)),
                    float(e["mu"]),
                )
                for e in d["ellipses"]
            )
            w = d.get("wire")
            wire = None if w is None else Wire(
                (float(w["center"][0]), float(w["center"][1])), float(w["radius"]), float(w["mu"])
            )
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ConfigError(f"bad phantom description: {exc!r}") from None
        return cls(ellipses, wire, str(d.get("name", "")))

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "ellipses": [
                {"center": list(e.center), "axes": list(e.axes), "angle": e.angle, "mu": e.mu}
                for e in self.ellipses
            ],
            "wire": None,
        }
        if self.wire is not None:
            d["wire"] = {"center": list(self.wire.center), "radius": self.wire.radius, "mu": self.wire.mu}
        return d


BUILTIN_PHANTOMS = ("water", "water_bone", "wire")


def load_phantom(source) -> Phantom:
    """Load a phantom from a JSON file path or one of the bundled names."""
    if isinstance(source, Phantom):
        return source
    if isinstance(source, dict):
        return Phantom.from_dict(source)
    if str(source) in BUILTIN_PHANTOMS:
        text = resources.files("lowsig").joinpath("data", "phantoms", f"{source}.json").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"phantom file not found: {path}")
        text = path.read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: {exc.msg}") from None
    return Phantom.from_dict(d)


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam geometry.

    Channel ``c`` sits at ``(c - (C-1)/2) * pitch`` cm from the isocentre and
    view ``v`` at angle ``angles[v]``; the ray of a (channel, view) pair is the
    line ``x cos(theta) + y sin(theta) = s``.
    """

    channels: int
    pitch: float
    rows: int = 1
    views: int = 720
    fov_radius: float | None = None
    angles: tuple[float, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.channels < 1 or self.rows < 1 or self.views < 1:
            raise ConfigError("channels, rows and views must all be >= 1")
        if not self.pitch > 0:
            raise ConfigError("channel pitch must be > 0")
        if self.fov_radius is None:
            object.__setattr__(self, "fov_radius", self.channels * self.pitch / 2.0)
        if not 0 < self.fov_radius <= self.channels * self.pitch / 2.0 + 1e-12:
            raise ConfigError("fov_radius must be positive and covered by the detector")
        if self.angles is None:
            object.__setattr__(self, "angles", tuple(np.arange(self.views) * math.pi / self.views))
        if len(self.angles) != self.views:
            raise ConfigError("need exactly one angle per view")
        if np.any(np.diff(self.angles) <= 0):
            raise ConfigError("view angles must be strictly increasing")

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.angles, dtype=np.float64)

    @property
    def channel_positions(self) -> np.ndarray:
        return (np.arange(self.channels) - (self.channels - 1) / 2.0) * self.pitch

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.channels, self.rows, self.views)

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        allowed = {"channels", "pitch", "rows", "views", "fov_radius", "angles"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown geometry keys: {sorted(unknown)}")
        try:
            kw = dict(d)
            for k in ("channels", "rows", "views"):
                if k in kw:
                    kw[k] = int(kw[k])
            if kw.get("angles") is not None:
                kw["angles"] = tuple(float(a) for a in kw["angles"])
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad geometry: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "pitch": self.pitch,
            "rows": self.rows,
            "views": self.views,
            "fov_radius": self.fov_radius,
        }


@dataclass(frozen=True)
class NoiseModel:
    i0: float
    sigma_e: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.i0 > 0:
            raise ConfigError("air-scan intensity i0 must be > 0")
        if not self.sigma_e >= 0:
            raise ConfigError("sigma_e must be >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


def ellipse_line_integrals(e: Ellipse, s: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Chord length times attenuation for lines ``x cos t + y sin t = s``.

    ``s`` and ``theta`` broadcast against each other.
    """
    a, b = e.axes
    shift = s - (e.center[0] * np.cos(theta) + e.center[1] * np.sin(theta))
    alpha = theta - e.angle
    r2 = (a * np.cos(alpha)) ** 2 + (b * np.sin(alpha)) ** 2
    disc = r2 - shift * shift
    chord = np.where(disc > 0.0, 2.0 * a * b * np.sqrt(np.maximum(disc, 0.0)) / r2, 0.0)
    return e.mu * chord


def forward_project(ph: Phantom, g: Geometry) -> SinogramGrid:
    """Exact line integrals of the phantom, replicated over every detector row."""
    for e in ph.shapes():
        if e.extent > g.fov_radius + 1e-12:
            raise ConfigError(
                f"phantom component at {e.center} (extent {e.extent:.3f} cm) "
                f"leaves the {g.fov_radius:.3f} cm field of view"
            )
    s = g.channel_positions[:, None]
    th = g.theta[None, :]
    p = np.zeros((g.channels, g.views))
    for e in ph.shapes():
        p += ellipse_line_integrals(e, s, th)
    data = np.repeat(p[:, None, :], g.rows, axis=1)
    return SinogramGrid(data, Stage.PROJECTION)


def counts_from_projection(p: SinogramGrid, i0: float) -> SinogramGrid:
    """Ideal Beer-Lambert counts ``i0 * exp(-p)``."""
    p.require(Stage.PROJECTION)
    if not i0 > 0:
        raise ConfigError("i0 must be > 0")
    if np.any(p.data < 0):
        raise ValueError("line integrals must be non-negative")
    return p.derive(i0 * np.exp(-p.data), Stage.COUNTS)


def add_noise(lam: SinogramGrid, nm: NoiseModel) -> SinogramGrid:
    """Poisson photon noise plus Gaussian electronic noise, seeded per cell.

    Every cell's draws depend only on ``(seed, flat index)`` where the flat
    index is channel-fastest, so any sub-block is reproducible on its own.
    """
    lam.require(Stage.COUNTS)
    if np.any(lam.data <= 0):
        raise ValueError("ideal counts must be strictly positive")
    C, R, V = lam.dims
    # channel-fastest flat index, matching the on-disk layout
    idx = np.arange(C * R * V, dtype=np.uint64).reshape((V, R, C)).transpose(2, 1, 0)
    seed = int(nm.seed)
    u = rng.uniform(seed, idx, stream=0)
    z_photon = rng.normal(seed, idx, stream=1)
    counts = rng.poisson(lam.data, u, z_photon)
    if nm.sigma_e > 0:
        counts = counts + nm.sigma_e * rng.normal(seed, idx, stream=2)
    return lam.derive(counts)


def simulate(ph: Phantom, g: Geometry, nm: NoiseModel):
    """Return ``(projection, ideal_counts, noisy_counts)`` grids."""
    p = forward_project(ph, g)
    ideal = counts_from_projection(p, nm.i0)
    return p, ideal, add_noise(ideal, nm)
