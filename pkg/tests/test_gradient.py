import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_complex
from seagle.forward import ForwardConfig
from seagle.gradient import (StaleRecordError, backpropagate, data_fidelity, data_gradient,
                             value_and_gradient)
from seagle.grid import Grid, SensorArray, SourceSpec
from seagle.model import MeasurementSet, ScatteringSetup
from seagle.oracles import replay_data_fidelity
from seagle.validation import gradient_errors, gradient_instance


@pytest.fixture(scope="module")
def instance():
    f, meas, setup, config = gradient_instance()
    value, grad, records = value_and_gradient(f, meas, setup, config)
    return f, meas, setup, config, value, grad, records


@pytest.fixture(scope="module")
def unit_instance():
    """Nondimensional instance: k = 1, pixel 0.6, noisy data."""
    rng = np.random.default_rng(0)
    grid = Grid((8, 8), 0.6)
    f = -0.5 * rng.random(grid.shape)
    sources = [SourceSpec.point((-4, 0.3), 1.0), SourceSpec.point((0.5, -4.5), 1.0)]
    sensors = SensorArray(np.array([[3.5, 0.0], [3.5, 1.5], [-3, 3], [0.0, -3.5]]))
    setup = ScatteringSetup(grid, 1.0, sources, sensors)
    meas = MeasurementSet(sources, sensors, setup.u_in_sensors + 0.05 * random_complex(rng, (2, 4)))
    config = ForwardConfig(max_iter=5, objective_tol=0.0)
    return f, meas, setup, config


def test_matches_finite_differences(instance):
    f, meas, setup, config, value, grad, records = instance
    assert [r.K_eff for r in records] == [5, 5]
    errs = gradient_errors(f, meas, setup, records, grad, 1e-3)
    assert errs.max() < 1e-6


def test_matches_finite_differences_nondimensional(unit_instance):
    f, meas, setup, config = unit_instance
    _, grad, records = value_and_gradient(f, meas, setup, config)
    assert gradient_errors(f, meas, setup, records, grad, 1e-4).max() < 1e-6


def test_directional_derivative(unit_instance, rng):
    f, meas, setup, config = unit_instance
    _, grad, records = value_and_gradient(f, meas, setup, config)
    d = rng.standard_normal(f.shape)
    eps = 1e-4
    fd = (replay_data_fidelity(f + eps * d, records, meas, setup)
          - replay_data_fidelity(f - eps * d, records, meas, setup)) / (2 * eps)
    assert fd == pytest.approx(np.sum(grad * d), rel=1e-7)


def test_converged_forward_gives_small_frozen_gap(unit_instance):
    """With a converged forward solve the frozen-step gradient tracks the adaptive one."""
    f, meas, setup, _ = unit_instance
    config = ForwardConfig(max_iter=500, objective_tol=1e-20)
    _, grad, _ = value_and_gradient(f, meas, setup, config)
    j, h = 27, 1e-5
    fp, fm = f.copy(), f.copy()
    fp.flat[j] += h
    fm.flat[j] -= h
    fd = (data_fidelity(fp, meas, setup, config)[0] - data_fidelity(fm, meas, setup, config)[0]) / (2 * h)
    assert fd == pytest.approx(grad.flat[j], rel=1e-4)


def test_zero_gradient_when_data_is_matched(instance):
    f, meas, setup, config, *_ = instance
    records = setup.forward(f, config)
    exact = MeasurementSet(meas.sources, meas.sensors, np.stack([r.u_hat for r in records]))
    value, grad, _ = value_and_gradient(f, exact, setup, config)
    assert value == 0.0
    assert not np.any(grad)


def test_stale_record_is_refused(instance):
    f, meas, setup, config, value, grad, records = instance
    with pytest.raises(StaleRecordError):
        data_gradient(f + 1.0, meas, records, setup)


def test_backward_cost_per_iteration(instance):
    f, meas, setup, config, value, grad, records = instance
    rec = records[0]
    before = setup.interior.applications
    backpropagate(rec, rec.u_hat - meas.data[0], setup.interior, setup.sensor_op)
    used = setup.interior.applications - before
    assert used == 3 * rec.K_eff <= 4 * rec.K_eff


def test_thread_pool_is_deterministic(instance):
    f, meas, setup, config, value, grad, records = instance
    _, grad2, _ = value_and_gradient(f, meas, setup, config, jobs=2)
    assert np.array_equal(grad, grad2)


coef = st.floats(-3, 3).filter(lambda x: x == 0 or abs(x) > 1e-6)


@settings(max_examples=10)
@given(coef, coef)
def test_backprop_is_linear_in_residual(a, b):
    f, meas, setup, config = gradient_instance()
    rec = setup.forward(f, config)[0]
    rng = np.random.default_rng(7)
    e1, e2 = random_complex(rng, len(setup.sensors)), random_complex(rng, len(setup.sensors))
    args = (setup.interior, setup.sensor_op)
    lhs = backpropagate(rec, a * e1 + b * e2, *args)
    rhs = a * backpropagate(rec, e1, *args) + b * backpropagate(rec, e2, *args)
    scale = np.abs(backpropagate(rec, e1, *args)).max() + np.abs(backpropagate(rec, e2, *args)).max()
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * (abs(a) + abs(b)) * scale)
