"""On-disk grid format: a JSON sidecar plus a raw little-endian row-major payload.

``name.json`` holds ``dim``, ``counts``, ``pixel_size``, ``origin`` and
``scalar`` (``real64`` or ``complex128-interleaved``); ``name.bin`` holds the
samples. Sensor vectors use the same layout with ``"domain": "sensor"`` and the
sensor coordinates in the sidecar.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid, InvalidInputError

_DTYPES = {"real64": np.dtype("<f8"), "complex128-interleaved": np.dtype("<c16")}


def _scalar_kind(a: np.ndarray) -> str:
    if np.iscomplexobj(a):
        return "complex128-interleaved"
    return "real64"


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".json"), p.with_name(p.name + ".bin")


def write_grid(path, values: np.ndarray, grid: Grid | None = None, **extra) -> Path:
    """Write ``values`` (sampled on ``grid``, or a 1D sensor vector) and return the sidecar path."""
    values = np.asarray(values)
    kind = _scalar_kind(values)
    meta: dict = {"scalar": kind, "byte_order": "little"}
    if grid is not None:
        if values.shape != grid.shape:
            raise InvalidInputError(f"values shape {values.shape} != grid {grid.shape}")
        meta.update(grid.to_dict(), domain="grid")
    else:
        if values.ndim != 1:
            raise InvalidInputError("non-grid payloads must be 1D sensor vectors")
        meta.update(dim=1, counts=[values.shape[0]], domain="sensor")
    meta.update(extra)
    jpath, bpath = _paths(path)
    jpath.parent.mkdir(parents=True, exist_ok=True)
    jpath.write_text(json.dumps(meta, indent=2, sort_keys=True))
    bpath.write_bytes(np.ascontiguousarray(values, dtype=_DTYPES[kind]).tobytes(order="C"))
    return jpath


def read_grid(path) -> tuple[np.ndarray, Grid | None, dict]:
    """Inverse of :func:`write_grid`; returns ``(values, grid_or_None, metadata)``."""
    jpath, bpath = _paths(path)
    meta = json.loads(jpath.read_text())
    if meta.get("byte_order", "little") != "little":
        raise InvalidInputError("only little-endian payloads are supported")
    dtype = _DTYPES[meta["scalar"]]
    counts = tuple(meta["counts"])
    values = np.frombuffer(bpath.read_bytes(), dtype=dtype)
    if values.size != int(np.prod(counts)):
        raise InvalidInputError(f"{bpath} holds {values.size} samples, sidecar says {counts}")
    values = values.reshape(counts).astype(dtype.newbyteorder("="))
    grid = None
    if meta.get("domain") == "grid":
        grid = Grid(counts, meta["pixel_size"], tuple(meta["origin"]))
    return values, grid, meta
