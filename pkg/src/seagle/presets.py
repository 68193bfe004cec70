"""Named geometries reproducing the analytic-validation and Shepp-Logan experiments.

Reduced grids keep the wavelength and pixel size and shrink every other
length by ``points / reference_points``, so the scene keeps its layout at a
smaller electrical size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, SensorArray, SourceSpec, wavenumber


@dataclass(frozen=True)
class Scene:
    grid: Grid
    k_b: float
    wavelength: float
    sources: tuple[SourceSpec, ...]
    sensors: SensorArray
    scale: float
    notes: dict

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "k_b": self.k_b, "wavelength": self.wavelength,
                "n_sources": len(self.sources), "n_sensors": len(self.sensors),
                "scale": self.scale, **self.notes}


# analytic validation: cylinder/sphere six wavelengths across
ANALYTIC_2D = dict(wavelength=74.9e-3, pixel_size=4.8e-3, points=250, diameter_wavelengths=6.0)
ANALYTIC_3D = dict(wavelength=74.9e-3, pixel_size=6.0e-3, points=128, diameter_wavelengths=6.0)

# Shepp-Logan inversion
FIG4 = dict(wavelength=7.49e-2, pixel_size=0.479e-2, points=250, detector_offset=95.9e-2,
            sensors_per_detector=169, sensor_spacing=3.84e-2, transmitter_gap=48.0e-2,
            max_angle_deg=60.0, angle_step_deg=5.0, contrast=0.2, tau_rel=1.5e-9,
            forward_max_iter=120, forward_objective_tol=5e-7)


def analytic_scene(dim: int = 2, points: int | None = None, source_distance: float | None = None,
                   ring_sensors: int = 90) -> Scene:
    """Point source on the -x axis and a ring of sensors around the domain."""
    ref = ANALYTIC_2D if dim == 2 else ANALYTIC_3D
    points = ref["points"] if points is None else points
    scale = points / ref["points"]
    lam = ref["wavelength"]
    k = wavenumber(lam)
    grid = Grid((points,) * dim, ref["pixel_size"])
    half = 0.5 * points * ref["pixel_size"]
    radius = 0.5 * ref["diameter_wavelengths"] * lam * scale
    d = source_distance if source_distance is not None else 1.5 * half
    loc = (-d,) + (0.0,) * (dim - 1)
    ring = 1.7 * half * np.sqrt(dim) / np.sqrt(2)
    if dim == 2:
        sensors = SensorArray.ring(ring, ring_sensors)
    else:
        # ring in the x-y plane plus the two axial points
        phi = 2 * np.pi * np.arange(ring_sensors) / ring_sensors
        pts = np.stack([ring * np.cos(phi), ring * np.sin(phi), np.zeros_like(phi)], axis=-1)
        pts = np.concatenate([pts, [[0, 0, ring], [0, 0, -ring]]])
        sensors = SensorArray(pts)
    return Scene(grid, k, lam, (SourceSpec.point(loc, k),), sensors, scale,
                 {"radius": radius, "preset": f"analytic-{dim}d"})


def fig4_scene(points: int = 250, angles_deg=None) -> Scene:
    """Two linear detectors left and right of the object, transmitters on a line
    beyond the left detector spaced uniformly in azimuth about the center."""
    p = FIG4
    scale = points / p["points"]
    lam = p["wavelength"]
    k = wavenumber(lam)
    grid = Grid((points, points), p["pixel_size"])
    x_det = p["detector_offset"] * scale
    step = p["sensor_spacing"] * scale
    n = p["sensors_per_detector"]
    ys = (np.arange(n) - 0.5 * (n - 1)) * step
    left = SensorArray(np.stack([np.full(n, -x_det), ys], axis=-1))
    right = SensorArray(np.stack([np.full(n, x_det), ys], axis=-1))
    sensors = SensorArray.concat(left, right)
    x_tx = -(p["detector_offset"] + p["transmitter_gap"]) * scale
    if angles_deg is None:
        angles_deg = np.arange(-p["max_angle_deg"], p["max_angle_deg"] + 1e-9, p["angle_step_deg"])
    sources = tuple(SourceSpec.point((x_tx, -x_tx * np.tan(np.deg2rad(a))), k) for a in angles_deg)
    return Scene(grid, k, lam, sources, sensors, scale,
                 {"preset": "fig4", "contrast": p["contrast"],
                  "angles_deg": [float(a) for a in angles_deg]})
