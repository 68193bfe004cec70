"""Scattering setup (grid, sources, sensors, operators) and measurement sets."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .forward import ForwardConfig, ForwardRecord, incident_field, solve_forward
from .green import InteriorOperator, SensorOperator
from .grid import GeometryError, Grid, InvalidInputError, SensorArray, SourceSpec
from .gridio import read_grid, write_grid


class ScatteringSetup:
    """Operators and incident fields for one grid and a set of transmitters.

    Everything is built lazily and reused; the object is read-only after
    construction and may be shared between threads.
    """

    def __init__(self, grid: Grid, k_b: float, sources: Sequence[SourceSpec],
                 sensors: SensorArray, dense_budget: int = 10**8):
        if not sources:
            raise InvalidInputError("need at least one source")
        for s in sources:
            if abs(s.k_b - k_b) > 1e-12 * k_b:
                raise InvalidInputError("source wavenumber differs from setup wavenumber")
            s.check_outside(grid)
        sensors.check_outside(grid)
        self.grid = grid
        self.k_b = float(k_b)
        self.sources = tuple(sources)
        self.sensors = sensors
        self.dense_budget = dense_budget

    @cached_property
    def interior(self) -> InteriorOperator:
        return InteriorOperator(self.grid, self.k_b)

    @cached_property
    def sensor_op(self) -> SensorOperator:
        return SensorOperator(self.grid, self.sensors, self.k_b, dense_budget=self.dense_budget)

    @cached_property
    def u_in(self) -> list[np.ndarray]:
        return [incident_field(s, self.grid) for s in self.sources]

    @cached_property
    def u_in_sensors(self) -> np.ndarray:
        return np.stack([incident_field(s, self.sensors) for s in self.sources])

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def map_sources(self, fn: Callable[[int], object], jobs: int = 1) -> list:
        """``[fn(i) for i in sources]``, optionally on a thread pool; order is preserved."""
        if jobs <= 1 or self.n_sources == 1:
            return [fn(i) for i in range(self.n_sources)]
        # build shared state before fanning out
        self.interior, self.sensor_op, self.u_in, self.u_in_sensors
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, range(self.n_sources)))

    def forward(self, f, config: ForwardConfig = ForwardConfig(), jobs: int = 1,
                warm: Sequence[np.ndarray] | None = None) -> list[ForwardRecord]:
        def one(i):
            return solve_forward(f, self.u_in[i], self.interior, self.sensor_op,
                                 self.u_in_sensors[i], config,
                                 u_init=None if warm is None else warm[i])
        return self.map_sources(one, jobs)


@dataclass
class MeasurementSet:
    """Complex sensor data, one row per source, with the geometry it belongs to."""

    sources: tuple[SourceSpec, ...]
    sensors: SensorArray
    data: np.ndarray
    metadata: dict | None = None

    def __post_init__(self):
        self.sources = tuple(self.sources)
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.complex128))
        if self.data.shape != (len(self.sources), len(self.sensors)):
            raise InvalidInputError(f"data shape {self.data.shape} does not match "
                                    f"{len(self.sources)} sources x {len(self.sensors)} sensors")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("measurements contain non-finite values")
        self.metadata = dict(self.metadata or {})

    def check_compatible(self, setup: ScatteringSetup) -> None:
        if len(self.sources) != setup.n_sources or len(self.sensors) != len(setup.sensors):
            raise GeometryError("measurement geometry does not match the setup")
        if not np.allclose(self.sensors.points, setup.sensors.points, rtol=0, atol=1e-12):
            raise GeometryError("sensor positions differ between measurements and setup")
        for a, b in zip(self.sources, setup.sources):
            if a != b:
                raise GeometryError("source list differs between measurements and setup")

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.data, self.data).real)

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        meta = dict(self.metadata)
        meta["sources"] = [source_to_dict(s) for s in self.sources]
        meta["sensors"] = self.sensors.points.tolist()
        meta["sensor_groups"] = list(self.sensors.groups)
        (d / "measurements.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        for i, row in enumerate(self.data):
            write_grid(d / f"m_{i:03d}", row, source=i)
        return d

    @classmethod
    def load(cls, directory) -> "MeasurementSet":
        d = Path(directory)
        meta = json.loads((d / "measurements.json").read_text())
        sources = tuple(source_from_dict(s) for s in meta.pop("sources"))
        sensors = SensorArray(np.array(meta.pop("sensors")), tuple(meta.pop("sensor_groups")))
        data = np.stack([read_grid(d / f"m_{i:03d}")[0] for i in range(len(sources))])
        return cls(sources, sensors, data, meta)


def source_to_dict(s: SourceSpec) -> dict:
    out = {"kind": s.kind, "k_b": s.k_b}
    if s.location is not None:
        out["location"] = list(s.location)
    if s.direction is not None:
        out["direction"] = list(s.direction)
    return out


def source_from_dict(d: dict) -> SourceSpec:
    return SourceSpec(d["kind"], d["k_b"], location=d.get("location"), direction=d.get("direction"))
