"""Data-fidelity term and its gradient by back-propagation through the forward iterates.

The backward pass treats ``gamma_k`` and ``mu_k`` as constants, so it is the
exact gradient of the frozen-step map (:func:`seagle.forward.replay_forward`),
not of the adaptive solver.
"""
from __future__ import annotations

import numpy as np

from .forward import ForwardConfig, ForwardRecord, SystemOperator
from .green import InteriorOperator, SensorOperator
from .model import MeasurementSet, ScatteringSetup


class StaleRecordError(ValueError):
    """A forward record was produced for a different potential."""


def data_fidelity(f, measurements: MeasurementSet, setup: ScatteringSetup,
                  config: ForwardConfig = ForwardConfig(), jobs: int = 1):
    """``sum_s 0.5 ||u_hat_s(f) - m_s||^2`` and the per-source forward records."""
    measurements.check_compatible(setup)
    records = setup.forward(f, config, jobs)
    return residual_value(records, measurements), records


def residual_value(records, measurements: MeasurementSet) -> float:
    total = 0.0
    for rec, m in zip(records, measurements.data):
        e = rec.u_hat - m
        total += 0.5 * float(np.vdot(e, e).real)
    return total


def backpropagate(record: ForwardRecord, residual: np.ndarray,
                  interior: InteriorOperator, sensor: SensorOperator) -> np.ndarray:
    """Complex ``r_0`` for one source given the sensor residual ``u_hat - m``.

    Per iteration this costs three applications of G or G^H: ``A q`` and
    ``G^H (A q)`` are shared between S_k and T_k, and ``G^H (A y_k - u_in)``
    comes from the cached residual when the record holds one.
    """
    f = record.f_snapshot
    fc = np.conj(f)
    A = SystemOperator(interior, f)
    back = sensor.adjoint(residual)
    q = fc * back
    r = np.conj(record.u_K) * back
    p = np.zeros_like(q)
    for k in range(record.K_eff - 1, -1, -1):
        gamma, mu, y = record.gamma[k], record.mu[k], record.y_history[k]
        if record.residuals is not None:
            res = record.residuals[k]
        else:
            res = A.apply(y) - record.u_in
        w = A.apply(q)
        z = interior.adjoint(w)
        Sq = q - gamma * (w - fc * z)
        Tq = np.conj(interior.adjoint(res)) * q + np.conj(y) * z
        p, q = -mu * Sq, p + (1.0 + mu) * Sq
        r = r + gamma * Tq
    return r


def data_gradient(f, measurements: MeasurementSet, records, setup: ScatteringSetup,
                  jobs: int = 1) -> np.ndarray:
    """Gradient of the data term, summed over sources in a fixed order."""
    values = np.asarray(getattr(f, "values", f))
    for rec in records:
        if not rec.matches(values):
            raise StaleRecordError("forward record was computed for a different potential")

    def one(i):
        rec = records[i]
        return backpropagate(rec, rec.u_hat - measurements.data[i], setup.interior, setup.sensor_op)

    parts = setup.map_sources(one, jobs)
    grad = np.zeros(setup.grid.shape)
    for part in parts:
        grad += part.real
    return grad


def value_and_gradient(f, measurements, setup, config=ForwardConfig(), jobs=1):
    value, records = data_fidelity(f, measurements, setup, config, jobs)
    return value, data_gradient(f, measurements, records, setup, jobs), records
