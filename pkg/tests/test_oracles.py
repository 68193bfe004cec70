import numpy as np
import pytest

from conftest import K
from seagle.forward import SystemOperator, incident_field
from seagle.green import InteriorOperator, dense_interior_matrix
from seagle.grid import Grid, InvalidInputError, ScatteringPotential, SensorArray, SourceSpec, homogeneous_potential
from seagle.model import MeasurementSet, ScatteringSetup
from seagle.oracles import (InverseCrimeError, NonConvergenceError, add_noise, direct_solve,
                            fd_gradient, synthesize_measurements)


@pytest.fixture(scope="module")
def small():
    grid = Grid((12, 12), 4.8e-3)
    f = homogeneous_potential(grid, 0.02, np.sqrt(1.3), K).values
    src = SourceSpec.point((-0.1, 0.0), K)
    return grid, f, InteriorOperator(grid, K), incident_field(src, grid)


def test_direct_solve_matches_dense_solve(small):
    grid, f, G, u_in = small
    A = np.eye(grid.size) - dense_interior_matrix(grid, K) * f.ravel()[None, :]
    ref = np.linalg.solve(A, u_in.ravel()).reshape(grid.shape)
    u, res = direct_solve(f, u_in, G, tol=1e-11)
    assert res < 1e-11
    assert np.linalg.norm(u - ref) / np.linalg.norm(ref) < 1e-9


def test_direct_solve_reports_true_residual(small):
    grid, f, G, u_in = small
    u, res = direct_solve(f, u_in, G, tol=1e-6)
    A = SystemOperator(G, f)
    assert res == pytest.approx(np.linalg.norm(A.apply(u) - u_in) / np.linalg.norm(u_in))


def test_direct_solve_trivial_and_failure(small):
    grid, f, G, u_in = small
    u, res = direct_solve(np.zeros(grid.shape), u_in, G)
    assert np.array_equal(u, u_in) and res == 0.0
    with pytest.raises(NonConvergenceError) as info:
        direct_solve(f, u_in, G, tol=1e-14, maxiter=1)
    assert info.value.residual > 1e-14
    with pytest.raises(InvalidInputError):
        direct_solve(f, u_in, G, tol=0.0)


@pytest.fixture(scope="module")
def geometry():
    coarse = Grid((12, 12), 4.8e-3)
    sources = [SourceSpec.point((-0.1, 0.0), K), SourceSpec.point((0.0, 0.1), K)]
    sensors = SensorArray.ring(0.08, 10)
    return coarse, sources, sensors


def test_synthesis_refuses_inverse_crime(geometry):
    coarse, sources, sensors = geometry
    f = ScatteringPotential.zeros(coarse)
    with pytest.raises(InverseCrimeError):
        synthesize_measurements(f, sources, sensors, K, recon_grid=coarse)
    m = synthesize_measurements(f, sources, sensors, K, recon_grid=coarse, allow_inverse_crime=True)
    assert m.data.shape == (2, 10)


def test_zero_contrast_measurements_equal_incident(geometry):
    coarse, sources, sensors = geometry
    fine = coarse.refined(2)
    m = synthesize_measurements(ScatteringPotential.zeros(fine), sources, sensors, K, recon_grid=coarse)
    setup = ScatteringSetup(coarse, K, sources, sensors)
    np.testing.assert_array_equal(m.data, setup.u_in_sensors)


def test_noise_is_seeded_and_scaled(rng):
    data = np.exp(1j * rng.uniform(0, 2 * np.pi, (40, 400)))
    a, b = add_noise(data, 20.0, seed=5), add_noise(data, 20.0, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, add_noise(data, 20.0, seed=6))
    snr = 10 * np.log10(np.mean(np.abs(data) ** 2) / np.mean(np.abs(a - data) ** 2))
    assert snr == pytest.approx(20.0, abs=0.1)
    assert add_noise(data, None, seed=1) is data


def test_synthesis_metadata(geometry):
    coarse, sources, sensors = geometry
    fine = coarse.refined(2)
    f = homogeneous_potential(fine, 0.02, 1.1, K)
    m = synthesize_measurements(f, sources, sensors, K, recon_grid=coarse, snr_db=30, seed=3)
    assert m.metadata["seed"] == 3 and m.metadata["snr_db"] == 30
    assert max(m.metadata["direct_residuals"]) < 1e-8
    assert m.metadata["simulation_grid"]["counts"] == [24, 24]


def test_fd_gradient_rejects_bad_step(geometry):
    coarse, sources, sensors = geometry
    setup = ScatteringSetup(coarse, K, sources, sensors)
    meas = MeasurementSet(sources, sensors, setup.u_in_sensors)
    with pytest.raises(InvalidInputError):
        fd_gradient(np.zeros(coarse.shape), meas, [], setup, 0, 0.0)
