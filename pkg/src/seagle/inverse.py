"""TV-regularized FISTA reconstruction with the SEAGLE, first-Born or Rytov data model."""
from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .forward import ForwardConfig
from .gradient import data_gradient, residual_value
from .grid import InvalidInputError
from .model import MeasurementSet, ScatteringSetup
from .tv import NONE, ConstraintSet, project, tv_prox, tv_value

log = logging.getLogger(__name__)


class RytovTransformError(ValueError):
    pass


def normalized_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    """``||estimate - truth||^2 / ||truth||^2``."""
    estimate, truth = np.asarray(estimate), np.asarray(truth)
    if estimate.shape != truth.shape:
        raise InvalidInputError("shape mismatch")
    den = float(np.vdot(truth, truth).real)
    if den == 0:
        raise ZeroDivisionError("reference has zero norm")
    d = estimate - truth
    return float(np.vdot(d, d).real) / den


normalized_data_fit = normalized_error


# -- linear baselines -------------------------------------------------------

def born_scattered(setup: ScatteringSetup, f, i: int) -> np.ndarray:
    f = np.asarray(getattr(f, "values", f))
    return setup.sensor_op.apply(setup.u_in[i] * f)


def forward_born(setup: ScatteringSetup, f) -> np.ndarray:
    """First-Born sensor prediction ``u_in + Gs diag(u_in) f`` for every source, shape (S, M)."""
    return np.stack([setup.u_in_sensors[i] + born_scattered(setup, f, i)
                     for i in range(setup.n_sources)])


def rytov_phase(setup: ScatteringSetup, f) -> np.ndarray:
    """First-Rytov complex phase ``(Gs diag(u_in) f) / u_in`` at the sensors, shape (S, M)."""
    return np.stack([born_scattered(setup, f, i) / setup.u_in_sensors[i]
                     for i in range(setup.n_sources)])


def forward_rytov(setup: ScatteringSetup, f) -> np.ndarray:
    """Rytov sensor prediction ``u_in * exp(phase)``."""
    return setup.u_in_sensors * np.exp(rytov_phase(setup, f))


def rytov_transform(m: np.ndarray, u_in: np.ndarray, groups=None,
                    return_mask: bool = False):
    """``log(m / u_in)`` with the phase unwrapped along each detector group.

    Sensors where either field vanishes are masked (set to 0). Raises only
    when every sensor is masked.
    """
    m = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    u_in = np.atleast_2d(np.asarray(u_in, dtype=np.complex128))
    groups = groups or (m.shape[1],)
    mask = (np.abs(m) > 0) & (np.abs(u_in) > 0)
    if not np.any(mask):
        raise RytovTransformError("no sensor with nonzero measured and incident field")
    ratio = np.where(mask, m / np.where(mask, u_in, 1.0), 1.0)
    amp = np.log(np.abs(ratio))
    phase = np.angle(ratio)
    start = 0
    for g in groups:
        phase[:, start:start + g] = np.unwrap(phase[:, start:start + g], axis=1)
        start += g
    out = np.where(mask, amp + 1j * phase, 0.0)
    return (out, mask) if return_mask else out


# -- data models ------------------------------------------------------------

class SeagleData:
    """Nonlinear data term through the accelerated-gradient forward model."""

    name = "seagle"

    def __init__(self, setup: ScatteringSetup, measurements: MeasurementSet,
                 forward: ForwardConfig = ForwardConfig(), jobs: int = 1,
                 warm_start: bool = False):
        measurements.check_compatible(setup)
        self.setup, self.m, self.forward_config = setup, measurements, forward
        self.jobs, self.warm_start = jobs, warm_start
        self._warm = None
        self._cache = None
        self.data_norm2 = measurements.norm2

    def _records(self, f):
        if self._cache is not None and self._cache[0].matches(f):
            return self._cache
        recs = self.setup.forward(f, self.forward_config, self.jobs,
                                  warm=self._warm if self.warm_start else None)
        if self.warm_start:
            self._warm = [r.u_K for r in recs]
        self._cache = recs
        return recs

    def value(self, f) -> float:
        return residual_value(self._records(f), self.m)

    def value_and_grad(self, f):
        recs = self._records(f)
        return residual_value(recs, self.m), data_gradient(f, self.m, recs, self.setup, self.jobs)

    def predict(self, f) -> np.ndarray:
        return np.stack([r.u_hat for r in self._records(f)])

    def data_fit(self, f) -> float:
        return normalized_data_fit(self.predict(f), self.m.data)


class _LinearData:
    """``0.5 ||B f - b||^2`` for a complex linear B: grid -> (S, M)."""

    def value(self, f) -> float:
        e = self._residual(f)
        return 0.5 * float(np.vdot(e, e).real)

    def value_and_grad(self, f):
        e = self._residual(f)
        return 0.5 * float(np.vdot(e, e).real), self._adjoint(e).real

    def _residual(self, f):
        return np.where(self.mask, self.apply(f) - self.target, 0.0)

    def normal(self, f):
        return self._adjoint(np.where(self.mask, self.apply(f), 0.0)).real

    def data_fit(self, f) -> float:
        return normalized_data_fit(self.predict(f), self.m.data)


class BornData(_LinearData):
    name = "born"

    def __init__(self, setup: ScatteringSetup, measurements: MeasurementSet):
        measurements.check_compatible(setup)
        self.setup, self.m = setup, measurements
        self.target = measurements.data - setup.u_in_sensors
        self.mask = np.ones(self.target.shape, dtype=bool)
        self.data_norm2 = measurements.norm2

    def apply(self, f):
        return np.stack([born_scattered(self.setup, f, i) for i in range(self.setup.n_sources)])

    def _adjoint(self, e):
        s = self.setup
        out = np.zeros(s.grid.shape, dtype=np.complex128)
        for i in range(s.n_sources):
            out += np.conj(s.u_in[i]) * s.sensor_op.adjoint(e[i])
        return out

    def predict(self, f):
        return forward_born(self.setup, f)


class RytovData(_LinearData):
    name = "rytov"

    def __init__(self, setup: ScatteringSetup, measurements: MeasurementSet):
        measurements.check_compatible(setup)
        self.setup, self.m = setup, measurements
        self.target, self.mask = rytov_transform(measurements.data, setup.u_in_sensors,
                                                 setup.sensors.groups, return_mask=True)
        self.data_norm2 = float(np.vdot(self.target, self.target).real)

    def apply(self, f):
        return rytov_phase(self.setup, f)

    def _adjoint(self, e):
        s = self.setup
        out = np.zeros(s.grid.shape, dtype=np.complex128)
        for i in range(s.n_sources):
            out += np.conj(s.u_in[i]) * s.sensor_op.adjoint(e[i] / np.conj(s.u_in_sensors[i]))
        return out

    def predict(self, f):
        return forward_rytov(self.setup, f)


def power_lipschitz(data_model: "_LinearData", iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``Re(B^H B)``."""
    x = np.random.default_rng(seed).standard_normal(data_model.setup.grid.shape)
    lam = 0.0
    for _ in range(iters):
        x /= np.linalg.norm(x)
        y = data_model.normal(x)
        lam = float(np.vdot(x, y).real)
        x = y
    return lam


def born_lipschitz(setup: ScatteringSetup, iters: int = 30, seed: int = 0) -> float:
    op = BornData.__new__(BornData)
    op.setup = setup
    op.mask = np.ones((setup.n_sources, len(setup.sensors)), dtype=bool)
    return power_lipschitz(op, iters, seed)


def make_data_model(model: str, setup, measurements, forward=ForwardConfig(), jobs=1,
                    warm_start=False):
    if model == "seagle":
        return SeagleData(setup, measurements, forward, jobs, warm_start)
    if model == "born":
        return BornData(setup, measurements)
    if model == "rytov":
        return RytovData(setup, measurements)
    raise InvalidInputError(f"unknown model {model!r}")


# -- FISTA ------------------------------------------------------------------

@dataclass(frozen=True)
class ReconstructionConfig:
    """Outer solver settings.

    ``tau`` is absolute; when ``tau_rel`` is given instead, the weight is
    ``tau_rel * ||data||^2`` where data is the fitted vector (the measured
    fields, or the Rytov log-ratio for the Rytov model).
    """

    tau: float | None = None
    tau_rel: float | None = 1.5e-9
    outer_iters: int = 50
    step: str = "backtracking"
    fixed_step: float | None = None
    backtrack_factor: float = 2.0
    max_backtracks: int = 20
    lipschitz_scale: float = 1.0
    constraint: ConstraintSet = NONE
    forward: ForwardConfig = ForwardConfig()
    model: str = "seagle"
    prox_iters: int = 100
    prox_tol: float = 1e-6
    warm_start_fields: bool = False
    init: str = "zero"

    def __post_init__(self):
        if self.outer_iters < 1:
            raise InvalidInputError("outer_iters must be >= 1")
        if (self.tau is None) == (self.tau_rel is None):
            raise InvalidInputError("give exactly one of tau and tau_rel")
        if (self.tau if self.tau is not None else self.tau_rel) < 0:
            raise InvalidInputError("tau must be non-negative")
        if self.step not in ("backtracking", "fixed"):
            raise InvalidInputError(f"unknown step rule {self.step!r}")
        if self.step == "fixed" and not (self.fixed_step and self.fixed_step > 0):
            raise InvalidInputError("fixed step rule needs a positive fixed_step")
        if self.model not in ("seagle", "born", "rytov"):
            raise InvalidInputError(f"unknown model {self.model!r}")
        if self.init not in ("zero", "born"):
            raise InvalidInputError(f"unknown initialization {self.init!r}")


@dataclass
class ReconstructionHistory:
    data_fit: list = field(default_factory=list)
    norm_data_fit: list = field(default_factory=list)
    norm_error: list = field(default_factory=list)
    step: list = field(default_factory=list)
    wall_s: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.data_fit)

    CSV_HEADER = ("iter", "data_fit", "norm_data_fit", "norm_error", "step", "wall_s")

    def rows(self):
        for i in range(len(self)):
            yield (i + 1, self.data_fit[i], self.norm_data_fit[i], self.norm_error[i],
                   self.step[i], self.wall_s[i])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_HEADER)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _tv_weight(config: ReconstructionConfig, data_model) -> float:
    if config.tau is not None:
        return config.tau
    return config.tau_rel * data_model.data_norm2


def reconstruct(config: ReconstructionConfig, measurements: MeasurementSet,
                setup: ScatteringSetup, ground_truth=None, f0=None, jobs: int = 1,
                callback=None):
    """FISTA on ``D(f) + tau TV(f)`` over the constraint set.

    Returns ``(f_hat, history)``. The data-fit entries of the history are
    evaluated at the accepted iterate of each outer iteration. With
    ``config.init == "born"`` and no explicit ``f0``, the start is a Born
    reconstruction under the same settings and budget.
    """
    if f0 is None and config.init == "born" and config.model != "born":
        f0, _ = reconstruct(replace(config, model="born", init="zero"), measurements, setup, jobs=jobs)
    data = make_data_model(config.model, setup, measurements, config.forward, jobs,
                           config.warm_start_fields)
    tau = _tv_weight(config, data)
    truth = None if ground_truth is None else np.asarray(getattr(ground_truth, "values", ground_truth))
    if config.step == "fixed":
        L = 1.0 / config.fixed_step
    else:
        linear = data if config.model == "rytov" else None
        L = config.lipschitz_scale * (power_lipschitz(linear) if linear else born_lipschitz(setup))
    x = np.zeros(setup.grid.shape) if f0 is None else np.array(getattr(f0, "values", f0), dtype=float)
    x_prev = x.copy()
    y = x.copy()
    t = 1.0
    hist = ReconstructionHistory()
    t0 = time.perf_counter()

    def prox(v, weight):
        if weight == 0:
            return project(v, config.constraint)
        return tv_prox(v, weight, config.constraint, config.prox_iters, config.prox_tol)

    for it in range(config.outer_iters):
        Dy, gy = data.value_and_grad(y)
        for bt in range(config.max_backtracks + 1):
            x = prox(y - gy / L, tau / L)
            Dx = data.value(x)
            if config.step == "fixed":
                break
            dx = x - y
            if Dx <= Dy + float(np.sum(gy * dx)) + 0.5 * L * float(np.sum(dx * dx)) * (1 + 1e-12):
                break
            L *= config.backtrack_factor
        else:
            msg = f"backtracking exhausted at outer iteration {it + 1}"
            warnings.warn(msg, RuntimeWarning)
            hist.warnings.append(msg)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + ((t - 1.0) / t_new) * (x - x_prev)
        x_prev, t = x, t_new

        hist.data_fit.append(Dx)
        hist.norm_data_fit.append(data.data_fit(x))
        hist.norm_error.append(normalized_error(x, truth) if truth is not None else float("nan"))
        hist.step.append(1.0 / L)
        hist.objective.append(Dx + tau * tv_value(x))
        hist.wall_s.append(time.perf_counter() - t0)
        log.info("%s it %d: D=%.4e fit=%.4e err=%.4e", config.model, it + 1, Dx,
                 hist.norm_data_fit[-1], hist.norm_error[-1])
        if callback is not None:
            callback(it, x, hist)
    return x, hist


def with_model(config: ReconstructionConfig, model: str) -> ReconstructionConfig:
    return replace(config, model=model)
