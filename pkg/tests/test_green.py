import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import hankel1, jv

from conftest import K, random_complex
from seagle.green import (InteriorOperator, SensorOperator, SingularityError, dense_interior_matrix,
                          direct_convolution_oracle, green_from_distance, green_scalar, self_cell)
from seagle.grid import GeometryError, Grid, InvalidInputError, SensorArray


@pytest.mark.parametrize("shape", [(8, 8), (16, 16), (5, 9), (8, 8, 8)])
def test_fft_matches_direct_summation(shape, rng):
    grid = Grid(shape, 4.8e-3)
    w = random_complex(rng, shape)
    G = InteriorOperator(grid, K)
    ref = direct_convolution_oracle(grid, K, w)
    assert np.linalg.norm(G.apply(w) - ref) / np.linalg.norm(ref) < 1e-10


def test_fft_matches_dense_matrix(rng):
    grid = Grid((6, 7), 0.01)
    w = random_complex(rng, grid.shape)
    ref = (dense_interior_matrix(grid, K) @ w.ravel()).reshape(grid.shape)
    np.testing.assert_allclose(InteriorOperator(grid, K).apply(w), ref, rtol=1e-12, atol=1e-14)


def test_padding_is_fast_length():
    G = InteriorOperator(Grid((250, 250), 4.8e-3), K)
    assert all(p >= 499 for p in G.padded_shape)


@pytest.mark.parametrize("shape", [(8, 8), (12, 10), (6, 6, 6)])
def test_interior_adjoint(shape, rng):
    G = InteriorOperator(Grid(shape, 4.8e-3), K)
    u, v = random_complex(rng, shape), random_complex(rng, shape)
    lhs, rhs = np.vdot(v, G.apply(u)), np.vdot(G.adjoint(v), u)
    assert abs(lhs - rhs) / abs(lhs) < 1e-12


@pytest.mark.parametrize("dense_budget", [10**8, 1])
def test_sensor_operator_dense_and_blocked_agree(dense_budget, rng):
    grid = Grid((10, 10), 4.8e-3)
    sensors = SensorArray.ring(0.08, 150)
    S = SensorOperator(grid, sensors, K, dense_budget=dense_budget, block=16)
    assert S.dense == (dense_budget > 1)
    w = random_complex(rng, grid.shape)
    ref = np.array([np.sum(green_scalar(p - grid.points(), K) * w.ravel()) * grid.cell_volume
                    for p in sensors.points])
    np.testing.assert_allclose(S.apply(w), ref, rtol=1e-12)
    e = random_complex(rng, len(sensors))
    assert abs(np.vdot(e, S.apply(w)) - np.vdot(S.adjoint(e), w)) < 1e-12 * abs(np.vdot(e, S.apply(w)))


def test_operators_check_shapes():
    grid = Grid((4, 4), 0.01)
    G = InteriorOperator(grid, K)
    with pytest.raises(GeometryError):
        G.apply(np.zeros((4, 5)))
    with pytest.raises(GeometryError):
        SensorOperator(grid, SensorArray(np.zeros((1, 2))), K)
    with pytest.raises(InvalidInputError):
        InteriorOperator(grid, -1.0)


def test_singularity_is_refused():
    with pytest.raises(SingularityError):
        green_from_distance(np.array([0.0, 1.0]), K, 2)


@given(st.floats(0.5, 3.0), st.floats(0.05, 0.75), st.floats(-np.pi, np.pi), st.booleans())
def test_graf_addition_theorem(hi, ratio, dphi, source_outside):
    """H0(k|x - y|) = sum_m J_m(k r<) H_m(k r>) exp(i m dphi); checks the 2D kernel independently."""
    k = 2.0
    lo = ratio * hi
    rho_src, rho_obs = (hi, lo) if source_outside else (lo, hi)
    x = rho_obs * np.array([np.cos(dphi), np.sin(dphi)])
    y = np.array([rho_src, 0.0])
    m = np.arange(-90, 91)
    series = np.sum(jv(m, k * lo) * hankel1(m, k * hi) * np.exp(1j * m * dphi))
    np.testing.assert_allclose(green_scalar(x - y, k), -0.25j * series, rtol=1e-9)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("h", [1e-3, 4.8e-3, 2e-2])
def test_self_cell_matches_quadrature(dim, h):
    a = h / np.sqrt(np.pi) if dim == 2 else h * (3 / (4 * np.pi)) ** (1 / 3)
    if dim == 2:
        fn = lambda r: 2 * np.pi * r * green_from_distance(r, K, 2)
    else:
        fn = lambda r: 4 * np.pi * r**2 * green_from_distance(r, K, 3)
    # r = a t^2 removes the logarithmic endpoint singularity in 2D
    sub = lambda t: fn(a * t * t) * 2 * a * t
    re = integrate.quad(lambda t: sub(t).real, 0, 1, limit=200, epsabs=0, epsrel=1e-13)[0]
    im = integrate.quad(lambda t: sub(t).imag, 0, 1, limit=200, epsabs=0, epsrel=1e-13)[0]
    np.testing.assert_allclose(self_cell(K, h, dim), re + 1j * im, rtol=1e-9)


@pytest.mark.parametrize("dim", [2, 3])
def test_helmholtz_residual_is_second_order(dim):
    """Off the singularity the kernel solves the homogeneous Helmholtz equation."""
    x0 = np.array([0.3, 0.2, 0.1][:dim]) * (2 * np.pi / K)
    res = []
    for h in (2e-3, 1e-3):
        lap = -2 * dim * green_scalar(x0, K)
        for d in range(dim):
            e = np.zeros(dim)
            e[d] = h
            lap += green_scalar(x0 + e, K) + green_scalar(x0 - e, K)
        res.append(abs(lap / h**2 + K**2 * green_scalar(x0, K)))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)


def test_kernel_is_outgoing_with_negative_sign():
    # far from the origin -(j/4) H0(kr) ~ -(j/4) sqrt(2/(pi k r)) exp(j(kr - pi/4))
    r = 500.0
    approx = -0.25j * np.sqrt(2 / (np.pi * K * r)) * np.exp(1j * (K * r - np.pi / 4))
    np.testing.assert_allclose(green_from_distance(r, K, 2), approx, rtol=1e-3)
    np.testing.assert_allclose(green_from_distance(2.0, K, 3), -np.exp(2j * K) / (8 * np.pi))
