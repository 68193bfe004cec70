"""Accelerated-gradient forward model for the discretized Lippmann-Schwinger equation.

The total field solves ``A u = u_in`` with ``A = I - G diag(f)``. It is
approximated by running Nesterov's method with exact line search on
``0.5 * ||A u - u_in||^2`` and the whole iterate history is kept so the
gradient with respect to ``f`` can be back-propagated through it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .green import InteriorOperator, SensorOperator, SingularityError, green_scalar
from .grid import GeometryError, Grid, InvalidInputError, ScatteringPotential, SensorArray, SourceSpec
from .gridio import read_grid, write_grid


class BreakdownError(RuntimeError):
    """Line search hit ``||A v|| = 0`` with a nonzero gradient."""


def _norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.vdot(x, x).real))


def incident_field(source: SourceSpec, targets: Grid | SensorArray) -> np.ndarray:
    """Incident field on a grid (grid-shaped) or at sensors (length M).

    A point source radiates the Green's function itself; a plane wave is
    ``exp(j k_b <d, x>)``.
    """
    if isinstance(targets, Grid):
        pts, shape = targets.points(), targets.shape
    else:
        pts, shape = targets.points, (len(targets),)
    if source.kind == "point":
        if len(source.location) != pts.shape[1]:
            raise GeometryError("source and target dimensions differ")
        diff = pts - np.asarray(source.location)
        if np.any(np.all(diff == 0, axis=-1)):
            raise SingularityError("point source coincides with a target sample")
        vals = green_scalar(diff, source.k_b, pts.shape[1])
    else:
        d = np.asarray(source.direction)
        vals = np.exp(1j * source.k_b * (pts @ d))
    return np.asarray(vals, dtype=np.complex128).reshape(shape)


class SystemOperator:
    """``A = I - G diag(f)`` and its adjoint ``A^H = I - diag(conj f) G^H``."""

    def __init__(self, interior: InteriorOperator, f: ScatteringPotential | np.ndarray):
        values = np.asarray(getattr(f, "values", f))
        if values.shape != interior.shape:
            raise GeometryError("potential does not match the operator grid")
        self.G = interior
        self.f = values

    def apply(self, u: np.ndarray) -> np.ndarray:
        return u - self.G.apply(self.f * u)

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        return u - np.conj(self.f) * self.G.adjoint(u)

    def __call__(self, u, adjoint=False):
        return self.adjoint(u) if adjoint else self.apply(u)


@dataclass(frozen=True)
class ForwardConfig:
    """Stopping rules for the forward solve.

    ``stop="objective"`` halts once ``0.5 ||A u_k - u_in||^2 < objective_tol * ||u_in||^2``;
    ``stop="gradient"`` halts when ``||v|| < gradient_tol * ||u_in||`` at the
    extrapolated point, before the update. ``0`` disables the tolerance.
    """

    max_iter: int = 120
    stop: str = "objective"
    objective_tol: float = 5e-7
    gradient_tol: float = 5e-7
    cache_residuals: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.stop not in ("objective", "gradient"):
            raise InvalidInputError(f"unknown stop rule {self.stop!r}")
        if self.objective_tol < 0 or self.gradient_tol < 0:
            raise InvalidInputError("tolerances must be non-negative")


@dataclass
class ForwardRecord:
    """Everything the backward pass needs from one forward solve.

    ``y_history[k-1]``, ``gamma[k-1]`` and ``mu[k-1]`` belong to iteration ``k``.
    ``residuals`` optionally caches ``A y_k - u_in``.
    """

    K_eff: int
    y_history: list
    gamma: np.ndarray
    mu: np.ndarray
    u_K: np.ndarray
    u_hat: np.ndarray | None
    f_snapshot: np.ndarray
    u_in: np.ndarray
    u_init: np.ndarray
    residual_norm: float
    initial_residual_norm: float
    residuals: list | None = None
    converged: bool = False
    objective_history: list = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.y_history) == len(self.gamma) == len(self.mu) == self.K_eff):
            raise InvalidInputError("record history lengths disagree with K_eff")

    def matches(self, f: np.ndarray) -> bool:
        return np.array_equal(np.asarray(getattr(f, "values", f)), self.f_snapshot)

    def save(self, directory, grid: Grid) -> Path:
        """Directory of grid-format files plus ``record.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_grid(d / "u_K", self.u_K, grid)
        write_grid(d / "f", self.f_snapshot, grid)
        write_grid(d / "u_in", self.u_in, grid)
        write_grid(d / "u_init", self.u_init, grid)
        if self.u_hat is not None:
            write_grid(d / "u_hat", self.u_hat)
        for k, y in enumerate(self.y_history, start=1):
            write_grid(d / f"y_{k:04d}", y, grid)
        meta = {"K_eff": self.K_eff, "gamma": [float(g) for g in self.gamma],
                "mu": [float(m) for m in self.mu], "residual_norm": self.residual_norm,
                "initial_residual_norm": self.initial_residual_norm,
                "converged": self.converged,
                "objective_history": [float(o) for o in self.objective_history]}
        (d / "record.json").write_text(json.dumps(meta, indent=2))
        return d

    @classmethod
    def load(cls, directory) -> "ForwardRecord":
        d = Path(directory)
        meta = json.loads((d / "record.json").read_text())
        u_hat = read_grid(d / "u_hat")[0] if (d / "u_hat.json").exists() else None
        ys = [read_grid(d / f"y_{k:04d}")[0] for k in range(1, meta["K_eff"] + 1)]
        return cls(K_eff=meta["K_eff"], y_history=ys, gamma=np.array(meta["gamma"], dtype=float),
                   mu=np.array(meta["mu"], dtype=float), u_K=read_grid(d / "u_K")[0],
                   u_hat=u_hat, f_snapshot=read_grid(d / "f")[0], u_in=read_grid(d / "u_in")[0],
                   u_init=read_grid(d / "u_init")[0], residual_norm=meta["residual_norm"],
                   initial_residual_norm=meta["initial_residual_norm"],
                   converged=meta["converged"], objective_history=meta["objective_history"])


def predict_sensors(sensor: SensorOperator, f: np.ndarray, u: np.ndarray,
                    u_in_sensors: np.ndarray) -> np.ndarray:
    """``u_in(sensors) + Gs diag(f) u``."""
    return u_in_sensors + sensor.apply(f * u)


def nesterov_coefficients(count: int) -> np.ndarray:
    """Momentum weights ``mu_k`` for k = 1..count from the t-sequence with ``t_0 = 0``."""
    mu = np.empty(count)
    t_prev = 0.0
    for k in range(count):
        t = (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2)) / 2.0
        mu[k] = (t_prev - 1.0) / t
        t_prev = t
    return mu


def solve_forward(f: ScatteringPotential | np.ndarray, u_in: np.ndarray,
                  interior: InteriorOperator, sensor: SensorOperator | None = None,
                  u_in_sensors: np.ndarray | None = None,
                  config: ForwardConfig = ForwardConfig(),
                  u_init: np.ndarray | None = None) -> ForwardRecord:
    """Run the accelerated forward iteration and record its history."""
    f = np.asarray(getattr(f, "values", f), dtype=np.float64)
    u_in = np.asarray(u_in, dtype=np.complex128)
    if u_in.shape != interior.shape:
        raise GeometryError("incident field does not match the grid")
    A = SystemOperator(interior, f)
    u_start = u_in if u_init is None else np.asarray(u_init, dtype=np.complex128)
    norm_in2 = float(np.vdot(u_in, u_in).real)
    obj_thr = config.objective_tol * norm_in2 if config.stop == "objective" else -np.inf
    grad_thr = config.gradient_tol * np.sqrt(norm_in2) if config.stop == "gradient" else 0.0

    u_prev2 = u_start
    u_prev = u_start
    t_prev = 0.0
    ys, gammas, mus, residuals, objectives = [], [], [], [], []
    converged = False
    initial_res = None
    for k in range(1, config.max_iter + 1):
        t = (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2)) / 2.0
        mu = (t_prev - 1.0) / t
        t_prev = t
        y = u_prev + mu * (u_prev - u_prev2)
        r = A.apply(y) - u_in
        if k == 1:
            # y_1 == u_0
            initial_res = _norm(r)
            objectives.append(0.5 * initial_res**2)
            if 0.5 * initial_res**2 < obj_thr:
                converged = True
                break
        v = A.adjoint(r)
        vnorm = _norm(v)
        if vnorm < grad_thr or vnorm == 0.0:
            converged = True
            break
        Av = A.apply(v)
        Avnorm = _norm(Av)
        if Avnorm == 0.0:
            raise BreakdownError(f"||A v|| = 0 with ||v|| = {vnorm:g} at iteration {k}")
        gamma = vnorm**2 / Avnorm**2
        u = y - gamma * v
        ys.append(y)
        gammas.append(gamma)
        mus.append(mu)
        if config.cache_residuals:
            residuals.append(r)
        u_prev2, u_prev = u_prev, u
        obj = 0.5 * _norm(r - gamma * Av) ** 2
        objectives.append(obj)
        if obj < obj_thr:
            converged = True
            break

    u_K = u_prev
    res = _norm(A.apply(u_K) - u_in) if ys else initial_res
    u_hat = None
    if sensor is not None:
        if u_in_sensors is None:
            raise InvalidInputError("u_in_sensors is required when a sensor operator is given")
        u_hat = predict_sensors(sensor, f, u_K, u_in_sensors)
    return ForwardRecord(K_eff=len(ys), y_history=ys, gamma=np.array(gammas), mu=np.array(mus),
                         u_K=u_K, u_hat=u_hat, f_snapshot=f.copy(), u_in=u_in, u_init=u_start,
                         residual_norm=res, initial_residual_norm=initial_res,
                         residuals=residuals if config.cache_residuals else None,
                         converged=converged, objective_history=objectives)


def replay_interior(record: ForwardRecord, f: np.ndarray, interior: InteriorOperator) -> np.ndarray:
    """Final interior field of the recurrences with ``gamma``/``mu`` frozen from ``record``."""
    f = np.asarray(getattr(f, "values", f), dtype=np.float64)
    A = SystemOperator(interior, f)
    u_in = record.u_in
    u_prev2 = u_prev = record.u_init
    for k in range(record.K_eff):
        mu, gamma = record.mu[k], record.gamma[k]
        y = u_prev + mu * (u_prev - u_prev2)
        r = A.apply(y) - u_in
        v = A.adjoint(r)
        u_prev2, u_prev = u_prev, y - gamma * v
    return u_prev


def replay_forward(record: ForwardRecord, f: ScatteringPotential | np.ndarray,
                   interior: InteriorOperator, sensor: SensorOperator,
                   u_in_sensors: np.ndarray) -> np.ndarray:
    """Sensor prediction of the frozen-step map whose Jacobian the backward pass computes."""
    if len(record.gamma) != record.K_eff or len(record.mu) != record.K_eff:
        raise InvalidInputError("record step lists do not match K_eff")
    f = np.asarray(getattr(f, "values", f), dtype=np.float64)
    return predict_sensors(sensor, f, replay_interior(record, f, interior), u_in_sensors)
