"""Free-space Green's function and its matrix-free discretizations.

The kernel follows the convention ``(laplacian + k_b**2) g = +delta``, i.e.

    g(x) = -(j/4) H0(k_b r)              in 2D
    g(x) = -exp(j k_b r) / (4 pi r)      in 3D

which is the negative of the more common outgoing Green's function.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as sfft
from scipy.special import hankel1

from .grid import GeometryError, Grid, InvalidInputError, SensorArray


class SingularityError(ValueError):
    """Raised when the Green's function is evaluated at zero separation."""


def green_from_distance(r: np.ndarray, k_b: float, dim: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r == 0):
        raise SingularityError("Green's function is singular at r = 0")
    if dim == 2:
        return -0.25j * hankel1(0, k_b * r)
    if dim == 3:
        return -np.exp(1j * k_b * r) / (4.0 * np.pi * r)
    raise InvalidInputError(f"dim must be 2 or 3, got {dim}")


def green_scalar(x, k_b: float, dim: int | None = None):
    """Green's function at offset(s) ``x`` with shape ``(..., dim)``."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1] if dim is None else dim
    if x.shape[-1] != dim:
        raise InvalidInputError("offset length does not match dim")
    out = green_from_distance(np.linalg.norm(x, axis=-1), k_b, dim)
    return out[()] if out.ndim == 0 else out


def equivalent_radius(pixel_size: float, dim: int) -> float:
    """Radius of the disk (2D) or ball (3D) with the same measure as one cell."""
    if dim == 2:
        return pixel_size / np.sqrt(np.pi)
    return pixel_size * (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)


def self_cell(k_b: float, pixel_size: float, dim: int) -> complex:
    """Integral of g over the disk/ball equivalent to one cell, centered on the singularity.

    2D: -(j/4) 2pi int_0^a H0(k r) r dr = 1/k^2 - (j pi a / 2k) H1(k a)
    3D: -int_0^a r exp(j k r) dr = (1 - exp(j k a)(1 - j k a)) / k^2
    """
    a = equivalent_radius(pixel_size, dim)
    k = k_b
    if dim == 2:
        return complex(1.0 / k**2 - 0.5j * np.pi * a / k * hankel1(1, k * a))
    if dim == 3:
        return complex((1.0 - np.exp(1j * k * a) * (1.0 - 1j * k * a)) / k**2)
    raise InvalidInputError(f"dim must be 2 or 3, got {dim}")


def kernel_at_lags(lags: np.ndarray, grid: Grid, k_b: float) -> np.ndarray:
    """Discrete kernel: g(lag*h) * h^D off the diagonal, self-cell integral at zero lag.

    ``lags`` holds integer offsets with shape ``(..., dim)``.
    """
    lags = np.asarray(lags)
    r = np.linalg.norm(lags * grid.pixel_size, axis=-1)
    zero = r == 0
    out = np.empty(r.shape, dtype=np.complex128)
    out[~zero] = green_from_distance(r[~zero], k_b, grid.dim) * grid.cell_volume
    out[zero] = self_cell(k_b, grid.pixel_size, grid.dim)
    return out


class InteriorOperator:
    """Convolution with the Green's function inside the domain, applied by padded FFT.

    ``applications`` counts forward plus adjoint applications; it is
    instrumentation only and is not used by any computation.
    """

    def __init__(self, grid: Grid, k_b: float, workers: int | None = None):
        if not k_b > 0:
            raise InvalidInputError("k_b must be positive")
        self.grid = grid
        self.k_b = float(k_b)
        self.workers = workers
        n = np.array(grid.counts)
        self.padded_shape = tuple(sfft.next_fast_len(int(2 * c - 1)) for c in n)
        lag_axes = []
        for c, p in zip(grid.counts, self.padded_shape):
            idx = np.arange(p)
            lag = np.where(idx < c, idx, idx - p)
            lag_axes.append(lag)
        mesh = np.meshgrid(*lag_axes, indexing="ij")
        lags = np.stack(mesh, axis=-1)
        valid = np.ones(self.padded_shape, dtype=bool)
        for d, m in enumerate(mesh):
            valid &= np.abs(m) < grid.counts[d]
        kernel = np.zeros(self.padded_shape, dtype=np.complex128)
        kernel[valid] = kernel_at_lags(lags[valid], grid, self.k_b)
        self.kernel = kernel
        self.spectrum = sfft.fftn(kernel, workers=workers)
        self._slices = tuple(slice(0, c) for c in grid.counts)
        self.applications = 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape

    def _check(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w)
        if w.shape != self.grid.shape:
            raise GeometryError(f"field shape {w.shape} does not match grid {self.grid.shape}")
        return w

    def apply(self, w: np.ndarray) -> np.ndarray:
        w = self._check(w)
        self.applications += 1
        wf = sfft.fftn(w, s=self.padded_shape, workers=self.workers)
        return sfft.ifftn(wf * self.spectrum, workers=self.workers)[self._slices]

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        # the kernel is even, so G is complex symmetric and G^H w = conj(G conj(w))
        return np.conj(self.apply(np.conj(self._check(w))))

    def __call__(self, w: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return self.adjoint(w) if adjoint else self.apply(w)

    def lag_kernel(self) -> np.ndarray:
        """Kernel on the centered ``2*counts - 1`` lag grid (for inspection/export)."""
        shifted = self.kernel
        idx = tuple(np.r_[np.arange(-(c - 1), 0) % p, np.arange(c)]
                    for c, p in zip(self.grid.counts, self.padded_shape))
        return shifted[np.ix_(*idx)]


def build_interior_operator(grid: Grid, k_b: float, workers: int | None = None) -> InteriorOperator:
    return InteriorOperator(grid, k_b, workers)


def apply_interior(op: InteriorOperator, w: np.ndarray, adjoint: bool = False) -> np.ndarray:
    return op(w, adjoint)


class SensorOperator:
    """Maps a grid function to sensor values: ``(Gs w)_m = sum_n g(x_m - x_n) w_n h^D``.

    The M x N matrix is stored when ``M * N <= dense_budget``, otherwise rows
    are generated on the fly in blocks.
    """

    def __init__(self, grid: Grid, sensors: SensorArray, k_b: float,
                 dense_budget: int = 10**8, block: int = 64):
        sensors.check_outside(grid)
        self.grid = grid
        self.sensors = sensors
        self.k_b = float(k_b)
        self.block = block
        self._points = grid.points()
        self.dense = len(sensors) * grid.size <= dense_budget
        self.matrix = self._rows(slice(None)) if self.dense else None

    def _rows(self, sl: slice) -> np.ndarray:
        diff = self.sensors.points[sl, None, :] - self._points[None, :, :]
        return green_scalar(diff, self.k_b, self.grid.dim) * self.grid.cell_volume

    def _blocks(self):
        for start in range(0, len(self.sensors), self.block):
            sl = slice(start, start + self.block)
            yield sl, self._rows(sl)

    def apply(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w)
        if w.shape != self.grid.shape:
            raise GeometryError("field does not match grid")
        w = w.ravel()
        if self.dense:
            return self.matrix @ w
        out = np.empty(len(self.sensors), dtype=np.complex128)
        for sl, rows in self._blocks():
            out[sl] = rows @ w
        return out

    def adjoint(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e)
        if e.shape != (len(self.sensors),):
            raise GeometryError("sensor vector has wrong length")
        if self.dense:
            out = self.matrix.conj().T @ e
        else:
            out = np.zeros(self.grid.size, dtype=np.complex128)
            for sl, rows in self._blocks():
                out += rows.conj().T @ e[sl]
        return out.reshape(self.grid.shape)

    def __call__(self, w: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return self.adjoint(w) if adjoint else self.apply(w)


def build_sensor_operator(grid: Grid, sensors: SensorArray, k_b: float, **kwargs) -> SensorOperator:
    return SensorOperator(grid, sensors, k_b, **kwargs)


def apply_sensor(op: SensorOperator, w: np.ndarray, adjoint: bool = False) -> np.ndarray:
    return op(w, adjoint)


MAX_ORACLE_SAMPLES = 16**3


def direct_convolution_oracle(grid: Grid, k_b: float, w: np.ndarray) -> np.ndarray:
    """Brute-force O(N^2) evaluation of the discrete convolution, for testing only."""
    if grid.size > MAX_ORACLE_SAMPLES:
        raise InvalidInputError(f"oracle limited to {MAX_ORACLE_SAMPLES} samples, grid has {grid.size}")
    w = np.asarray(w, dtype=np.complex128).ravel()
    idx = np.stack([m.ravel() for m in np.meshgrid(*[np.arange(c) for c in grid.counts],
                                                    indexing="ij")], axis=-1)
    h = grid.pixel_size
    vol = grid.cell_volume
    diag = self_cell(k_b, h, grid.dim)
    out = np.empty(grid.size, dtype=np.complex128)
    for i in range(grid.size):
        acc = diag * w[i]
        for j in range(grid.size):
            if j == i:
                continue
            r = h * np.sqrt(float(np.sum((idx[i] - idx[j]) ** 2)))
            acc += green_from_distance(r, k_b, grid.dim) * vol * w[j]
        out[i] = acc
    return out.reshape(grid.shape)


def dense_interior_matrix(grid: Grid, k_b: float) -> np.ndarray:
    """Assembled N x N matrix of the interior operator (small grids only)."""
    if grid.size > MAX_ORACLE_SAMPLES:
        raise InvalidInputError("grid too large for dense assembly")
    pts = grid.points()
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    mat = np.empty(r.shape, dtype=np.complex128)
    off = r > 0
    mat[off] = green_from_distance(r[off], k_b, grid.dim) * grid.cell_volume
    mat[~off] = self_cell(k_b, grid.pixel_size, grid.dim)
    return mat
