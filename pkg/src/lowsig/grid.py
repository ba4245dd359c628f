"""Sinogram container, window specification and shrink-to-fit local statistics.

A sinogram is held as a float64 array of shape ``(channels, rows, views)``.
On disk the same grid is stored channel-fastest (see :mod:`lowsig.fileio`).
Windows never pad: near the grid border a window is clipped to the in-bounds
cells, so statistics are always taken over real measurements.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels


class Stage(str, enum.Enum):
    COUNTS = "counts"
    VST = "vst"
    PROJECTION = "projection"

    @property
    def units(self) -> str:
        return {"counts": "counts", "vst": "vst", "projection": "line-integral"}[self.value]


# Counts -> Vst -> Counts -> Projection is the correction chain; Projection ->
# Counts is only taken by the simulator when it turns line integrals into counts.
_TRANSITIONS = {
    (Stage.COUNTS, Stage.VST),
    (Stage.VST, Stage.COUNTS),
    (Stage.COUNTS, Stage.PROJECTION),
    (Stage.PROJECTION, Stage.COUNTS),
}


@dataclass(frozen=True)
class SinogramGrid:
    """Dense ``(C, R, V)`` grid of real values tagged with its pipeline stage."""

    data: np.ndarray
    stage: Stage = Stage.COUNTS

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"sinogram data must be a non-empty 3-D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise ValueError(f"non-finite value at index {tuple(int(i) for i in bad)}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "stage", Stage(self.stage))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def derive(self, data: np.ndarray, stage: Stage | None = None) -> "SinogramGrid":
        """Return a new grid with the same dims holding ``data`` at ``stage``."""
        stage = self.stage if stage is None else Stage(stage)
        if stage != self.stage and (self.stage, stage) not in _TRANSITIONS:
            raise ValueError(f"illegal stage transition {self.stage.value} -> {stage.value}")
        data = np.asarray(data, dtype=np.float64)
        if data.shape != self.data.shape:
            raise ValueError(f"shape {data.shape} does not match grid dims {self.dims}")
        return SinogramGrid(data, stage)

    def require(self, stage: Stage) -> None:
        if self.stage != stage:
            raise ValueError(f"expected a {stage.value} grid, got {self.stage.value}")


@dataclass(frozen=True)
class WindowSpec:
    """Per-axis half-widths ``(h_c, h_r, h_v)``; the full window is ``2h+1`` per axis."""

    hc: int
    hr: int
    hv: int

    def __post_init__(self):
        for h in (self.hc, self.hr, self.hv):
            if int(h) != h or h < 0:
                raise ValueError(f"half-widths must be non-negative integers, got {self.half_widths}")

    @classmethod
    def from_size(cls, size: Iterable[int]) -> "WindowSpec":
        """Build from full odd sizes, e.g. ``(7, 5, 3)`` -> half-widths ``(3, 2, 1)``."""
        size = tuple(int(s) for s in size)
        if len(size) != 3 or any(s < 1 or s % 2 == 0 for s in size):
            raise ValueError(f"window size must be three odd positive integers, got {size}")
        return cls(*(s // 2 for s in size))

    @property
    def half_widths(self) -> tuple[int, int, int]:
        return (self.hc, self.hr, self.hv)

    @property
    def size(self) -> tuple[int, int, int]:
        return tuple(2 * h + 1 for h in self.half_widths)

    @property
    def volume(self) -> int:
        return int(np.prod(self.size))


@dataclass(frozen=True)
class LocalStats:
    mean: SinogramGrid
    std: SinogramGrid


def window_indices(dims, center, w: WindowSpec) -> list[tuple[tuple[int, int, int], tuple[int, int, int]]]:
    """List the in-bounds neighbours of ``center`` as ``(index, offset)`` pairs.

    Offsets run in lexicographic ``(dc, dr, dv)`` order, the same order the
    filtering kernels accumulate in.
    """
    dims = tuple(int(n) for n in dims)
    center = tuple(int(i) for i in center)
    if len(dims) != 3 or len(center) != 3:
        raise ValueError("dims and center must both have three components")
    if any(not 0 <= i < n for i, n in zip(center, dims)):
        raise ValueError(f"center {center} outside grid dims {dims}")
    ranges = [
        range(max(-h, -i), min(h, n - 1 - i) + 1)
        for i, n, h in zip(center, dims, w.half_widths)
    ]
    out = []
    for dc in ranges[0]:
        for dr in ranges[1]:
            for dv in ranges[2]:
                out.append(((center[0] + dc, center[1] + dr, center[2] + dv), (dc, dr, dv)))
    return out


def local_stats(grid: SinogramGrid, w: WindowSpec) -> LocalStats:
    """Shrink-window mean and sample (n-1) standard deviation of every cell."""
    mean, std = kernels.local_moments(grid.data, w.half_widths)
    return LocalStats(grid.derive(mean), grid.derive(std))


def local_mean(grid: SinogramGrid, w: WindowSpec) -> SinogramGrid:
    return local_stats(grid, w).mean


def local_std(grid: SinogramGrid, w: WindowSpec) -> SinogramGrid:
    """Sample standard deviation over the clipped window; single-cell windows give 0."""
    return local_stats(grid, w).std
