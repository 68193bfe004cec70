import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import K, random_complex
from seagle.forward import (ForwardConfig, ForwardRecord, SystemOperator, incident_field,
                            nesterov_coefficients, replay_forward, replay_interior, solve_forward)
from seagle.green import InteriorOperator, SensorOperator, SingularityError
from seagle.grid import GeometryError, Grid, InvalidInputError, SensorArray, SourceSpec, homogeneous_potential
from seagle.oracles import direct_solve


@pytest.fixture(scope="module")
def scene():
    grid = Grid((32, 32), 4.8e-3)
    G = InteriorOperator(grid, K)
    sensors = SensorArray.ring(0.15, 24)
    S = SensorOperator(grid, sensors, K)
    src = SourceSpec.point((-0.12, 0.02), K)
    f = homogeneous_potential(grid, 0.05, np.sqrt(1.1), K)
    return grid, G, S, src, f.values, incident_field(src, grid), incident_field(src, sensors)


def test_nesterov_coefficients_start_at_minus_one():
    mu = nesterov_coefficients(6)
    assert mu[0] == -1.0 and mu[1] == 0.0
    t = [0.0]
    for _ in range(6):
        t.append(0.5 * (1 + np.sqrt(1 + 4 * t[-1] ** 2)))
    np.testing.assert_allclose(mu, [(t[k] - 1) / t[k + 1] for k in range(6)])


@given(st.integers(3, 400))
def test_nesterov_coefficients_increase_towards_one(n):
    mu = nesterov_coefficients(n)
    assert np.all(np.diff(mu) > 0) and mu[-1] < 1.0


def test_zero_potential_returns_incident_field(scene):
    grid, G, S, src, _, u_in, u_in_s = scene
    rec = solve_forward(np.zeros(grid.shape), u_in, G, S, u_in_s)
    assert rec.K_eff == 0 and rec.converged
    assert np.array_equal(rec.u_K, u_in)
    assert np.array_equal(rec.u_hat, u_in_s)


def test_converges_to_direct_solution(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    rec = solve_forward(f, u_in, G, config=ForwardConfig(max_iter=3000, objective_tol=1e-24))
    u_ref, _ = direct_solve(f, u_in, G, tol=1e-12)
    assert np.linalg.norm(rec.u_K - u_ref) / np.linalg.norm(u_ref) < 1e-9


def test_objective_recurrence_matches_recomputed_residual(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    rec = solve_forward(f, u_in, G)
    assert rec.converged
    exact = 0.5 * rec.residual_norm**2
    assert rec.objective_history[-1] == pytest.approx(exact, rel=1e-8)
    assert exact < 5e-7 * np.vdot(u_in, u_in).real


def test_max_iter_caps_k_eff(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    rec = solve_forward(f, u_in, G, config=ForwardConfig(max_iter=4, objective_tol=0.0))
    assert rec.K_eff == 4 and not rec.converged
    assert len(rec.y_history) == len(rec.gamma) == len(rec.mu) == len(rec.residuals) == 4
    # the first step starts from the incident field
    assert np.array_equal(rec.y_history[0], u_in)


def test_gradient_stop_rule(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    loose = solve_forward(f, u_in, G, config=ForwardConfig(stop="gradient", gradient_tol=1e-2))
    tight = solve_forward(f, u_in, G, config=ForwardConfig(stop="gradient", gradient_tol=1e-6))
    A = SystemOperator(G, f)
    assert 0 < loose.K_eff < tight.K_eff
    assert np.linalg.norm(A.adjoint(A.apply(tight.u_K) - u_in)) < np.linalg.norm(
        A.adjoint(A.apply(loose.u_K) - u_in))


def test_warm_start_needs_fewer_iterations(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    cold = solve_forward(f, u_in, G)
    warm = solve_forward(f * 1.001, u_in, G, u_init=cold.u_K)
    assert warm.K_eff < cold.K_eff
    assert np.array_equal(warm.u_init, cold.u_K)


def test_replay_is_bit_identical(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    rec = solve_forward(f, u_in, G, S, u_in_s)
    assert np.array_equal(replay_interior(rec, f, G), rec.u_K)
    assert np.array_equal(replay_forward(rec, f, G, S, u_in_s), rec.u_hat)


def test_record_roundtrip(scene, tmp_path):
    grid, G, S, src, f, u_in, u_in_s = scene
    rec = solve_forward(f, u_in, G, S, u_in_s, ForwardConfig(max_iter=7, objective_tol=0.0))
    back = ForwardRecord.load(rec.save(tmp_path / "rec", grid))
    assert back.K_eff == 7
    np.testing.assert_array_equal(back.gamma, rec.gamma)
    np.testing.assert_array_equal(back.u_hat, rec.u_hat)
    for a, b in zip(back.y_history, rec.y_history):
        np.testing.assert_array_equal(a, b)
    assert np.array_equal(replay_forward(back, f, G, S, u_in_s), rec.u_hat)
    assert back.matches(f) and not back.matches(f + 1.0)


def test_system_adjoint(scene, rng):
    grid, G, S, src, f, u_in, u_in_s = scene
    A = SystemOperator(G, f)
    u, v = random_complex(rng, grid.shape), random_complex(rng, grid.shape)
    assert abs(np.vdot(v, A.apply(u)) - np.vdot(A.adjoint(v), u)) < 1e-12 * np.linalg.norm(u) * np.linalg.norm(v)


def test_incident_fields():
    grid = Grid((4, 4), 0.1)
    plane = incident_field(SourceSpec.plane((1.0, 0.0), 2.0), grid)
    np.testing.assert_allclose(plane, np.exp(2j * grid.mesh()[0]))
    sensors = SensorArray(np.array([[0.5, 0.0]]))
    with pytest.raises(SingularityError):
        incident_field(SourceSpec.point((0.5, 0.0), 2.0), sensors)
    with pytest.raises(GeometryError):
        incident_field(SourceSpec.point((0.5, 0.0, 0.0), 2.0), grid)


@pytest.mark.parametrize("kwargs", [dict(max_iter=0), dict(stop="residual"), dict(objective_tol=-1.0)])
def test_forward_config_validation(kwargs):
    with pytest.raises(InvalidInputError):
        ForwardConfig(**kwargs)


def test_shape_mismatch(scene):
    grid, G, S, src, f, u_in, u_in_s = scene
    with pytest.raises(GeometryError):
        solve_forward(f, u_in[:-1], G)
    with pytest.raises(InvalidInputError):
        solve_forward(f, u_in, G, S)


@pytest.mark.parametrize("c", [0.02, 0.1, 0.3])
def test_converged_residual_below_initial(scene, c):
    grid, G, S, src, _, u_in, u_in_s = scene
    f = homogeneous_potential(grid, 0.05, np.sqrt(1 + c), K).values
    rec = solve_forward(f, u_in, G, config=ForwardConfig(max_iter=2000))
    A = SystemOperator(G, f)
    initial = np.linalg.norm(A.apply(u_in) - u_in)
    assert rec.converged
    assert rec.initial_residual_norm == pytest.approx(initial, rel=1e-12)
    assert np.linalg.norm(A.apply(rec.u_K) - u_in) <= initial
