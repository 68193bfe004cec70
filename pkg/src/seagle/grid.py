"""Grids, potentials, sources and sensors.

All lengths are in meters and wavenumbers in rad/m.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidInputError(ValueError):
    pass


class GeometryError(ValueError):
    pass


def wavenumber(wavelength: float) -> float:
    """Background wavenumber k_b = 2*pi/wavelength."""
    if not wavelength > 0:
        raise InvalidInputError(f"wavelength must be positive, got {wavelength}")
    return 2.0 * np.pi / wavelength


@dataclass(frozen=True)
class Grid:
    """Regular isotropic sampling of the image domain.

    Sample ``i`` along an axis sits at ``origin + i * pixel_size``. When
    ``origin`` is omitted the grid is centered on zero.
    """

    counts: tuple[int, ...]
    pixel_size: float
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) not in (2, 3):
            raise InvalidInputError(f"grid must be 2D or 3D, got {len(counts)} axes")
        if any(c < 2 for c in counts):
            raise InvalidInputError(f"need at least 2 samples per axis, got {counts}")
        if not (np.isfinite(self.pixel_size) and self.pixel_size > 0):
            raise InvalidInputError(f"pixel_size must be positive, got {self.pixel_size}")
        if self.origin is None:
            origin = tuple(-0.5 * (c - 1) * self.pixel_size for c in counts)
        else:
            origin = tuple(float(o) for o in self.origin)
            if len(origin) != len(counts):
                raise InvalidInputError("origin and counts differ in length")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "pixel_size", float(self.pixel_size))
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return self.pixel_size**self.dim

    def axis(self, d: int) -> np.ndarray:
        return self.origin[d] + np.arange(self.counts[d]) * self.pixel_size

    def axes(self) -> list[np.ndarray]:
        return [self.axis(d) for d in range(self.dim)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """Sample coordinates as an ``(N, dim)`` array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box covering every pixel cell (half a pixel beyond centers)."""
        lo = np.array(self.origin) - 0.5 * self.pixel_size
        hi = lo + np.array(self.counts) * self.pixel_size
        return lo, hi

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        lo, hi = self.bounds()
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def refined(self, factor: int) -> "Grid":
        """Grid covering the same cells with ``factor`` times more samples per axis.

        Fine pixel centers never coincide with coarse ones when ``factor`` is even.
        """
        h = self.pixel_size / factor
        lo, _ = self.bounds()
        return Grid(tuple(c * factor for c in self.counts), h, tuple(lo + 0.5 * h))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "counts": list(self.counts),
                "pixel_size": self.pixel_size, "origin": list(self.origin)}


@dataclass(frozen=True)
class ScatteringPotential:
    """Real scattering potential ``f = k_b**2 (1 - n**2)`` sampled on a grid (m^-2)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise InvalidInputError(f"values shape {values.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("scattering potential has non-finite entries")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScatteringPotential":
        return cls(grid, np.zeros(grid.shape))

    def __mul__(self, c: float) -> "ScatteringPotential":
        return ScatteringPotential(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SourceSpec:
    """Point source at ``location`` or plane wave travelling along ``direction``."""

    kind: str
    k_b: float
    location: tuple[float, ...] | None = None
    direction: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.k_b > 0:
            raise InvalidInputError(f"k_b must be positive, got {self.k_b}")
        if self.kind == "point":
            if self.location is None:
                raise InvalidInputError("point source needs a location")
            object.__setattr__(self, "location", tuple(float(x) for x in self.location))
        elif self.kind == "plane":
            if self.direction is None:
                raise InvalidInputError("plane wave needs a direction")
            d = np.asarray(self.direction, dtype=float)
            if abs(np.linalg.norm(d) - 1.0) > 1e-12:
                raise InvalidInputError("plane-wave direction must have unit norm")
            object.__setattr__(self, "direction", tuple(d))
        else:
            raise InvalidInputError(f"unknown source kind {self.kind!r}")

    @classmethod
    def point(cls, location: Sequence[float], k_b: float) -> "SourceSpec":
        return cls("point", k_b, location=tuple(location))

    @classmethod
    def plane(cls, direction: Sequence[float], k_b: float) -> "SourceSpec":
        return cls("plane", k_b, direction=tuple(direction))

    def check_outside(self, grid: Grid) -> None:
        if self.kind == "point" and grid.contains(np.array(self.location))[0]:
            raise GeometryError(f"point source at {self.location} lies inside the domain")


@dataclass(frozen=True)
class SensorArray:
    points: np.ndarray
    groups: tuple[int, ...] = field(default=())

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float)).copy()
        if pts.shape[0] < 1:
            raise InvalidInputError("need at least one sensor")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        # groups: contiguous run lengths of linear detectors, used for phase unwrapping
        groups = tuple(int(g) for g in self.groups) or (pts.shape[0],)
        if sum(groups) != pts.shape[0]:
            raise InvalidInputError("sensor groups must partition the sensor list")
        object.__setattr__(self, "groups", groups)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def check_outside(self, grid: Grid) -> None:
        if self.dim != grid.dim:
            raise GeometryError("sensor and grid dimensions differ")
        inside = grid.contains(self.points)
        if np.any(inside):
            raise GeometryError(f"{int(inside.sum())} sensor(s) lie inside the domain")

    @classmethod
    def line(cls, start: Sequence[float], step: Sequence[float], count: int) -> "SensorArray":
        start, step = np.asarray(start, float), np.asarray(step, float)
        return cls(start + np.arange(count)[:, None] * step)

    @classmethod
    def ring(cls, radius: float, count: int, center=(0.0, 0.0)) -> "SensorArray":
        phi = 2 * np.pi * np.arange(count) / count
        return cls(np.stack([center[0] + radius * np.cos(phi),
                             center[1] + radius * np.sin(phi)], axis=-1))

    @classmethod
    def concat(cls, *arrays: "SensorArray") -> "SensorArray":
        return cls(np.concatenate([a.points for a in arrays]),
                   tuple(g for a in arrays for g in a.groups))


def potential_from_index(n: np.ndarray, k_b: float, grid: Grid | None = None) -> ScatteringPotential | np.ndarray:
    """Scattering potential ``k_b**2 (1 - n**2)`` from a refractive-index map.

    Returns a :class:`ScatteringPotential` when ``grid`` is given, else a bare array.
    """
    n = np.asarray(n, dtype=float)
    if not np.all(np.isfinite(n)) or np.any(n <= 0):
        raise InvalidInputError("refractive index must be finite and positive")
    f = k_b**2 * (1.0 - n**2)
    return f if grid is None else ScatteringPotential(grid, f)


def index_from_potential(f: np.ndarray, k_b: float) -> np.ndarray:
    return np.sqrt(1.0 - np.asarray(f) / k_b**2)


def contrast(f: ScatteringPotential | np.ndarray, k_b: float) -> float:
    """max|f| / k_b**2."""
    if not k_b > 0:
        raise InvalidInputError("k_b must be positive")
    values = np.asarray(getattr(f, "values", f))
    if values.size == 0:
        raise InvalidInputError("empty potential")
    return float(np.max(np.abs(values)) / k_b**2)


# Modified Shepp-Logan (Toft): intensity, semi-axes a, b, center x0, y0, rotation (deg)
_SHEPP_LOGAN = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
])


def shepp_logan_pattern(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Modified Shepp-Logan intensity at normalized coordinates (head spans [-0.69, 0.69] x [-0.92, 0.92])."""
    # accumulate in integer tenths so overlapping intensities cancel exactly
    tenths = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    for val, a, b, x0, y0, deg in _SHEPP_LOGAN:
        th = np.deg2rad(deg)
        xr = (x - x0) * np.cos(th) + (y - y0) * np.sin(th)
        yr = -(x - x0) * np.sin(th) + (y - y0) * np.cos(th)
        tenths += int(round(10 * val)) * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return tenths / 10.0


def make_shepp_logan(grid: Grid, target_contrast: float, k_b: float, *,
                     height: float | None = None, sign: float = -1.0,
                     supersample: int = 1) -> ScatteringPotential:
    """Shepp-Logan phantom scaled to ``target_contrast``.

    The first grid axis is horizontal (x) and the second vertical (y). ``height``
    is the physical extent of the outer ellipse along y; by default it fills
    113/120 of the grid's smaller extent. ``sign=-1`` gives ``f <= 0``, i.e. an
    object with refractive index above the background. ``supersample > 1``
    averages the ellipse indicator over a sub-grid in each cell, in which case
    partially covered rim cells can leave the contrast slightly below target.
    """
    if grid.dim != 2:
        raise NotImplementedError("Shepp-Logan phantom is only defined in 2D")
    if target_contrast < 0:
        raise InvalidInputError("target_contrast must be non-negative")
    if target_contrast == 0:
        return ScatteringPotential.zeros(grid)
    lo, hi = grid.bounds()
    if height is None:
        height = (113.0 / 120.0) * float(np.min(hi - lo))
    unit = 0.5 * height / 0.92
    X, Y = grid.mesh()
    sub = ((np.arange(supersample) + 0.5) / supersample - 0.5) * grid.pixel_size
    pattern = np.zeros(grid.shape)
    for dx in sub:
        for dy in sub:
            pattern += shepp_logan_pattern((X + dx) / unit, (Y + dy) / unit)
    pattern /= supersample**2
    # the pattern's nominal peak is 1 (the outer rim), so scaling does not depend on sampling
    return ScatteringPotential(grid, np.sign(sign) * target_contrast * k_b**2 * pattern)


def disk_fraction(grid: Grid, radius: float, center: Sequence[float] | None = None,
                  supersample: int = 8) -> np.ndarray:
    """Fraction of each pixel/voxel cell covered by a disk (2D) or ball (3D)."""
    center = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    h = grid.pixel_size
    sub = (np.arange(supersample) + 0.5) / supersample - 0.5
    frac = np.zeros(grid.shape)
    offsets = np.meshgrid(*([sub * h] * grid.dim), indexing="ij")
    mesh = grid.mesh()
    for off in zip(*(o.ravel() for o in offsets)):
        r2 = sum((mesh[d] + off[d] - center[d]) ** 2 for d in range(grid.dim))
        frac += r2 <= radius**2
    return frac / supersample**grid.dim


def homogeneous_potential(grid: Grid, radius: float, n: float, k_b: float,
                          center: Sequence[float] | None = None,
                          supersample: int = 8) -> ScatteringPotential:
    """Cylinder or sphere of index ``n``, with boundary cells weighted by coverage."""
    frac = disk_fraction(grid, radius, center, supersample)
    return ScatteringPotential(grid, k_b**2 * (1.0 - n**2) * frac)
