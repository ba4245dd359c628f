"""On-disk formats.

Grids and images are a JSON header ``<stem>.json`` next to a raw
little-endian body ``<stem>.bin``.  Grid bodies are channel-fastest
(axis order ``channel,row,view``); image bodies are row-major ``[iy, ix]``.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError
from .grid import SinogramGrid, Stage
from .recon import Image

_DTYPES = {"f32": "<f4", "f64": "<f8"}


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (".json", ".bin"):
        path = path.with_suffix("")
    return path.with_suffix(".json"), path.with_suffix(".bin")


def _read_header(path) -> tuple[dict, Path]:
    head, body = _paths(path)
    if not head.is_file():
        raise ConfigError(f"no such file: {head}")
    try:
        header = json.loads(head.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{head}: line {exc.lineno}: {exc.msg}") from None
    return header, body.with_name(header.get("data_file", body.name))


def _read_body(body: Path, dtype: str, count: int) -> np.ndarray:
    if dtype not in _DTYPES:
        raise DataError(f"unsupported dtype {dtype!r}")
    if not body.is_file():
        raise ConfigError(f"no such file: {body}")
    raw = np.fromfile(body, dtype=_DTYPES[dtype])
    if raw.size != count:
        raise DataError(f"{body}: expected {count} values, found {raw.size}")
    return raw.astype(np.float64)


def write_grid(path, grid: SinogramGrid, dtype: str = "f32") -> Path:
    if dtype not in _DTYPES:
        raise ConfigError(f"dtype must be one of {sorted(_DTYPES)}")
    head, body = _paths(path)
    head.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "sinogram",
        "dims": list(grid.dims),
        "axis_order": "channel,row,view",
        "dtype": dtype,
        "byte_order": "little",
        "stage": grid.stage.value,
        "units": grid.stage.units,
        "data_file": body.name,
    }
    grid.data.ravel(order="F").astype(_DTYPES[dtype]).tofile(body)
    head.write_text(json.dumps(header, indent=2) + "\n")
    return head


def read_grid(path) -> SinogramGrid:
    header, body = _read_header(path)
    if header.get("kind") != "sinogram":
        raise DataError(f"{path}: not a sinogram header")
    if header.get("axis_order", "channel,row,view") != "channel,row,view":
        raise DataError(f"{path}: unsupported axis order {header.get('axis_order')!r}")
    dims = tuple(int(d) for d in header["dims"])
    data = _read_body(body, header["dtype"], int(np.prod(dims)))
    try:
        return SinogramGrid(data.reshape(dims, order="F"), Stage(header["stage"]))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_image(path, img: Image, dtype: str = "f32", extra: dict | None = None) -> Path:
    head, body = _paths(path)
    head.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "image",
        "n": img.n,
        "pitch_cm": img.pitch,
        "center_cm": list(img.center),
        "dtype": dtype,
        "byte_order": "little",
        "units": "1/cm",
        "data_file": body.name,
    }
    if extra:
        header.update(extra)
    img.data.astype(_DTYPES[dtype]).tofile(body)
    head.write_text(json.dumps(header, indent=2) + "\n")
    return head


def read_image(path) -> Image:
    header, body = _read_header(path)
    if header.get("kind") != "image":
        raise DataError(f"{path}: not an image header")
    n = int(header["n"])
    data = _read_body(body, header["dtype"], n * n).reshape(n, n)
    return Image(data, float(header["pitch_cm"]), tuple(header.get("center_cm", (0.0, 0.0))))


def config_hash(cfg) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def append_manifest(out_dir, command: str, config, seed, inputs, outputs) -> Path:
    """Record one pipeline stage in ``<out_dir>/manifest.json``."""
    out_dir = Path(out_dir)
    path = out_dir / "manifest.json"
    manifest = {"tool": "lowsig", "version": __version__, "stages": []}
    if path.is_file():
        manifest = json.loads(path.read_text())
    manifest["stages"].append(
        {
            "command": command,
            "config_hash": config_hash(config),
            "config": config,
            "seed": seed,
            "inputs": [str(p) for p in inputs],
            "outputs": [str(p) for p in outputs],
        }
    )
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    """Write rows with '.' decimals regardless of locale (``repr`` of floats)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return path
