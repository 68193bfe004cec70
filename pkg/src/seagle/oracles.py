"""Independent references: a Krylov solve of the scattering system, finite-difference
gradients through the frozen-step map, and measurement synthesis on a finer grid."""
from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, bicgstab

from .forward import SystemOperator, replay_forward
from .green import InteriorOperator
from .grid import InvalidInputError, ScatteringPotential, SensorArray
from .model import MeasurementSet, ScatteringSetup


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class InverseCrimeError(ValueError):
    """Synthetic data would share the reconstruction grid."""


def direct_solve(f, u_in: np.ndarray, interior: InteriorOperator, tol: float = 1e-8,
                 maxiter: int = 10_000) -> tuple[np.ndarray, float]:
    """Solve ``(I - G diag(f)) u = u_in`` with BiCGSTAB.

    Returns ``(u, relative_residual)`` where the residual is recomputed
    from scratch, ``||A u - u_in|| / ||u_in||``.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    f = np.asarray(getattr(f, "values", f), dtype=float)
    u_in = np.asarray(u_in, dtype=np.complex128)
    A = SystemOperator(interior, f)
    bnorm = np.linalg.norm(u_in)
    if not np.any(f):
        return u_in.copy(), 0.0
    shape = interior.shape
    op = LinearOperator((u_in.size, u_in.size), dtype=np.complex128,
                        matvec=lambda x: A.apply(x.reshape(shape)).ravel())
    x, _ = bicgstab(op, u_in.ravel(), x0=u_in.ravel(), rtol=tol, atol=0.0, maxiter=maxiter)
    u = x.reshape(shape)
    res = float(np.linalg.norm(A.apply(u) - u_in) / bnorm)
    if res > tol:
        # BiCGSTAB's recursive residual can drift from the true one; one restart
        x, _ = bicgstab(op, u_in.ravel(), x0=x, rtol=tol, atol=0.0, maxiter=maxiter)
        u = x.reshape(shape)
        res = float(np.linalg.norm(A.apply(u) - u_in) / bnorm)
    if res > tol:
        raise NonConvergenceError(f"BiCGSTAB stopped at relative residual {res:.3e}", res)
    return u, res


def replay_data_fidelity(f, records, measurements: MeasurementSet, setup: ScatteringSetup) -> float:
    """``sum_s 0.5 ||replay_forward(f) - m_s||^2`` with the records' steps frozen."""
    total = 0.0
    for i, rec in enumerate(records):
        e = replay_forward(rec, f, setup.interior, setup.sensor_op, setup.u_in_sensors[i]) - measurements.data[i]
        total += 0.5 * float(np.vdot(e, e).real)
    return total


def fd_gradient(f, measurements: MeasurementSet, records, setup: ScatteringSetup,
                j: int | tuple, h: float) -> float:
    """Central difference of the frozen-step data term along pixel ``j`` (flat or tuple index)."""
    if not h > 0:
        raise InvalidInputError("h must be positive")
    f = np.array(getattr(f, "values", f), dtype=float)
    idx = np.unravel_index(j, f.shape) if np.isscalar(j) else tuple(j)
    fp, fm = f.copy(), f.copy()
    fp[idx] += h
    fm[idx] -= h
    return (replay_data_fidelity(fp, records, measurements, setup)
            - replay_data_fidelity(fm, records, measurements, setup)) / (2.0 * h)


def add_noise(data: np.ndarray, snr_db: float | None, seed: int | None) -> np.ndarray:
    """Complex white Gaussian noise at ``snr_db`` relative to the mean signal power."""
    if snr_db is None:
        return data
    rng = np.random.default_rng(seed)
    power = float(np.mean(np.abs(data) ** 2)) / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
    return data + np.sqrt(power / 2.0) * noise


def synthesize_measurements(f_fine: ScatteringPotential, sources, sensors: SensorArray,
                            k_b: float, recon_grid=None, snr_db: float | None = None,
                            seed: int | None = 0, tol: float = 1e-8,
                            allow_inverse_crime: bool = False) -> MeasurementSet:
    """Sensor data from a direct solve on the grid of ``f_fine``.

    ``recon_grid`` is the grid the data will be inverted on; unless
    ``allow_inverse_crime`` is set, the simulation grid must be strictly finer.
    """
    grid = f_fine.grid
    if recon_grid is not None and not allow_inverse_crime:
        if grid == recon_grid or grid.pixel_size >= recon_grid.pixel_size:
            raise InverseCrimeError("simulation grid must be strictly finer than the reconstruction grid")
    setup = ScatteringSetup(grid, k_b, list(sources), sensors)
    rows, residuals = [], []
    for i in range(setup.n_sources):
        u, res = direct_solve(f_fine, setup.u_in[i], setup.interior, tol)
        rows.append(setup.u_in_sensors[i] + setup.sensor_op.apply(f_fine.values * u))
        residuals.append(res)
    data = add_noise(np.stack(rows), snr_db, seed)
    meta = {"simulation_grid": grid.to_dict(), "seed": seed, "snr_db": snr_db,
            "direct_tol": tol, "direct_residuals": residuals,
            "recon_grid": None if recon_grid is None else recon_grid.to_dict()}
    return MeasurementSet(tuple(sources), sensors, data, meta)
