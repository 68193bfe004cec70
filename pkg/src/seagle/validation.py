"""Oracle comparisons grouped into named suites.

Each suite returns a list of :class:`Check` rows (measured value against a
threshold). The command-line ``validate`` command prints them as a table and
the acceptance tests assert on the same rows.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .analytic import HomogeneousScatterer, analytic_field
from .forward import ForwardConfig, incident_field, predict_sensors, solve_forward
from .gradient import value_and_gradient
from .green import InteriorOperator, SensorOperator, direct_convolution_oracle
from .grid import Grid, SensorArray, SourceSpec, homogeneous_potential, make_shepp_logan, wavenumber
from .inverse import ReconstructionConfig, normalized_error, reconstruct
from .model import MeasurementSet, ScatteringSetup
from .oracles import direct_solve, fd_gradient, synthesize_measurements
from .presets import FIG4, analytic_scene, fig4_scene
from .tv import ConstraintSet, prox_objective, tv_prox

log = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    measured: float
    threshold: float
    passed: bool
    relation: str = "<"
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<52s} {self.measured:.3e} {self.relation} {self.threshold:.3e}"


def _below(name, value, thr, **extra) -> Check:
    value = float(value)
    return Check(name, value, thr, bool(np.isfinite(value) and value < thr), "<", extra)


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# -- operators --------------------------------------------------------------

def green_ops(seed: int = 0, shapes=((8, 8), (16, 16), (8, 8, 8))) -> list[Check]:
    """FFT convolution against direct summation, and adjoint identities."""
    rng = np.random.default_rng(seed)
    k = wavenumber(FIG4["wavelength"])
    out = []
    for shape in shapes:
        grid = Grid(shape, FIG4["pixel_size"])
        G = InteriorOperator(grid, k)
        w = _random_complex(rng, shape)
        tag = "x".join(map(str, shape))
        out.append(_below(f"green-ops FFT vs direct {tag}", _rel(G.apply(w), direct_convolution_oracle(grid, k, w)), 1e-10))
        v = _random_complex(rng, shape)
        lhs, rhs = np.vdot(v, G.apply(w)), np.vdot(G.adjoint(v), w)
        out.append(_below(f"green-ops interior adjoint {tag}", abs(lhs - rhs) / abs(lhs), 1e-12))
        half = 0.5 * shape[0] * grid.pixel_size
        pts = rng.uniform(-3 * half, 3 * half, (7, len(shape)))
        pts[:, 0] = np.sign(pts[:, 0] + 1e-3) * (1.5 * half + np.abs(pts[:, 0]))
        S = SensorOperator(grid, SensorArray(pts), k)
        e = _random_complex(rng, len(pts))
        lhs, rhs = np.vdot(e, S.apply(w)), np.vdot(S.adjoint(e), w)
        out.append(_below(f"green-ops sensor adjoint {tag}", abs(lhs - rhs) / abs(lhs), 1e-12))
    return out


# -- gradient ---------------------------------------------------------------

def gradient_instance(seed: int = 0):
    """Small physical instance: 8x8 pixels, two sources, four sensors, K_eff = 5."""
    rng = np.random.default_rng(seed)
    k = wavenumber(FIG4["wavelength"])
    grid = Grid((8, 8), 4.8e-3)
    f = -0.3 * k**2 * rng.random(grid.shape)
    sources = [SourceSpec.point((-0.1, 0.01), k), SourceSpec.point((0.02, -0.12), k)]
    sensors = SensorArray(np.array([[0.06, 0.0], [0.06, 0.03], [-0.05, 0.05], [0.0, -0.07]]))
    setup = ScatteringSetup(grid, k, sources, sensors)
    meas = MeasurementSet(sources, sensors, setup.u_in_sensors * (1 + 0.1j) + 1e-3)
    config = ForwardConfig(max_iter=5, objective_tol=0.0)
    return f, meas, setup, config


def gradient_errors(f, meas, setup, records, grad, scale: float) -> np.ndarray:
    errs = np.empty(f.size)
    for j in range(f.size):
        h = scale * (1.0 + abs(f.flat[j]))
        fd = fd_gradient(f, meas, records, setup, j, h)
        errs[j] = abs(fd - grad.flat[j]) / abs(grad.flat[j])
    return errs


def gradient_suite(seed: int = 0, scale: float = 1e-3) -> list[Check]:
    """Backpropagated gradient against central differences of the frozen-step replay."""
    f, meas, setup, config = gradient_instance(seed)
    _, grad, records = value_and_gradient(f, meas, setup, config)
    k_eff = [r.K_eff for r in records]
    errs = gradient_errors(f, meas, setup, records, grad, scale)
    coarse = gradient_errors(f, meas, setup, records, grad, 10 * scale)
    # O(h^2): a 10x larger step should raise the truncation error about 100x
    order = np.log10(np.median(coarse) / np.median(errs))
    return [
        Check("gradient K_eff == 5 for every source", float(min(k_eff)), 5.0,
              all(k == 5 for k in k_eff), "=="),
        _below("gradient max component rel. err", errs.max(), 1e-6, median=float(np.median(errs))),
        Check("gradient FD observed order (h 10x)", float(order), 1.8, bool(1.8 < order < 2.2), ">"),
    ]


# -- forward model vs analytic series ------------------------------------------

def _cylinder(points: int, c: float, pixel_size: float | None = None, supersample: int = 8):
    """Analytic 2D scene reduced to ``points`` per axis, optionally at a finer pixel."""
    scene = analytic_scene(2, points if pixel_size is None else 128)
    grid = scene.grid if pixel_size is None else Grid((points, points), pixel_size)
    n = np.sqrt(1.0 + c)
    f = homogeneous_potential(grid, scene.notes["radius"], n, scene.k_b, supersample=supersample)
    return scene, grid, f, HomogeneousScatterer(scene.notes["radius"], n)


def forward_convergence(points: int = 128, c: float = 0.2) -> Check:
    scene, grid, f, _ = _cylinder(points, c)
    G = InteriorOperator(grid, scene.k_b)
    u_in = incident_field(scene.sources[0], grid)
    rec = solve_forward(f, u_in, G, config=ForwardConfig(max_iter=FIG4["forward_max_iter"]))
    return Check(f"forward objective < 5e-7 |u_in|^2 within K=120 ({points}^2, {c:.0%})",
                 float(rec.K_eff), float(FIG4["forward_max_iter"]), bool(rec.converged), "<=")


def contrast_sweep(points: int = 128, contrasts=(0.01, 0.05, 0.1, 0.2, 0.5, 1.0),
                   dim: int = 2, max_iter: int = 5000) -> list[dict]:
    """Normalized sensor errors of SEAGLE, first Born and Rytov against the series."""
    scene = analytic_scene(dim, points)
    grid, k = scene.grid, scene.k_b
    src, sensors = scene.sources[0], scene.sensors
    G = InteriorOperator(grid, k)
    S = SensorOperator(grid, sensors, k, dense_budget=2 * 10**7)
    u_in, u_in_s = incident_field(src, grid), incident_field(src, sensors)
    rows = []
    for c in contrasts:
        n = np.sqrt(1.0 + c)
        scat = HomogeneousScatterer(scene.notes["radius"], n, (0.0,) * dim)
        f = homogeneous_potential(grid, scat.radius, n, k)
        ref = analytic_field(scat, src, sensors.points)
        t0 = time.perf_counter()
        rec = solve_forward(f, u_in, G, S, u_in_s, ForwardConfig(max_iter=max_iter))
        born = predict_sensors(S, f.values, u_in, u_in_s)
        rytov = u_in_s * np.exp((born - u_in_s) / u_in_s)
        rows.append({"contrast": c, "K_eff": rec.K_eff, "converged": rec.converged,
                     "seagle": normalized_error(rec.u_hat, ref), "born": normalized_error(born, ref),
                     "rytov": normalized_error(rytov, ref), "wall_s": time.perf_counter() - t0})
        log.info("sweep %s", rows[-1])
    return rows


def sweep_checks(rows: list[dict], at: float = 0.2, label: str = "2D") -> list[Check]:
    r = {row["contrast"]: row for row in rows}
    out = []
    if at in r:
        row = r[at]
        out.append(_below(f"{label} {at:.0%}: SEAGLE error < Born error", row["seagle"], row["born"]))
        out.append(_below(f"{label} {at:.0%}: SEAGLE error < Rytov error", row["seagle"], row["rytov"]))
    if len(rows) > 1:
        worst = max(row["seagle"] for row in rows)
        out.append(_below(f"{label} sweep: max SEAGLE error", worst, 1e-1))
        top = rows[-1]
        out.append(Check(f"{label} {top['contrast']:.0%}: Born error exceeds 1e-1", top["born"], 1e-1,
                         bool(top["born"] > 1e-1), ">"))
    return out


def cross_oracle(c: float = 0.1, points=(128, 256), tol: float = 1e-8) -> list[Check]:
    """Krylov solve vs the series at the sensors, on a grid and its 2x refinement."""
    errs = []
    for p in points:
        scene, grid, f, scat = _cylinder(p, c, pixel_size=4.8e-3 * 128 / p)
        src = scene.sources[0]
        G = InteriorOperator(grid, scene.k_b)
        S = SensorOperator(grid, scene.sensors, scene.k_b, dense_budget=2 * 10**7)
        u, _ = direct_solve(f, incident_field(src, grid), G, tol)
        pred = predict_sensors(S, f.values, u, incident_field(src, scene.sensors))
        errs.append(_rel(pred, analytic_field(scat, src, scene.sensors.points)))
    out = [_below(f"Krylov vs series {c:.0%} cylinder, {points[0]}^2", errs[0], 1e-3)]
    out.append(_below(f"Krylov vs series error decreases at {points[1]}^2", errs[1], errs[0]))
    return out


def zero_contrast() -> list[Check]:
    scene = analytic_scene(2, 32)
    grid = scene.grid
    G = InteriorOperator(grid, scene.k_b)
    S = SensorOperator(grid, scene.sensors, scene.k_b)
    src = scene.sources[0]
    u_in_s = incident_field(src, scene.sensors)
    rec = solve_forward(np.zeros(grid.shape), incident_field(src, grid), G, S, u_in_s)
    series = analytic_field(HomogeneousScatterer(scene.notes["radius"], 1.0), src, scene.sensors.points)
    return [Check("contrast 0: SEAGLE equals incident field", float(np.max(np.abs(rec.u_hat - u_in_s))),
                  0.0, bool(np.array_equal(rec.u_hat, u_in_s)), "=="),
            _below("contrast 0: series equals incident field", _rel(series, u_in_s), 1e-14)]


def forward_analytic(include_sweep: bool = True) -> list[Check]:
    out = zero_contrast()
    out.append(forward_convergence())
    if include_sweep:
        out += sweep_checks(contrast_sweep())
    out += cross_oracle()
    return out


# -- TV prox ---------------------------------------------------------------

def prox_oracle(g: np.ndarray, alpha: float, constraint: ConstraintSet = ConstraintSet()) -> np.ndarray:
    """Conic solve of the prox problem with explicit per-pixel differences."""
    import cvxpy as cp

    x = cp.Variable(g.shape)
    terms = []
    n0, n1 = g.shape
    for i in range(n0):
        for j in range(n1):
            dx = x[i + 1, j] - x[i, j] if i + 1 < n0 else 0
            dy = x[i, j + 1] - x[i, j] if j + 1 < n1 else 0
            if i + 1 < n0 or j + 1 < n1:
                terms.append(cp.norm(cp.hstack([dx, dy]), 2))
    cons = []
    lo, hi = constraint.bounds
    if np.isfinite(lo):
        cons.append(x >= lo)
    if np.isfinite(hi):
        cons.append(x <= hi)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(x - g) + alpha * sum(terms)), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return np.asarray(x.value)


def prox_suite(seed: int = 0, trials: int = 10) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        g = rng.standard_normal((2, 2))
        alpha = float(rng.uniform(0.05, 1.0))
        constraint = ConstraintSet("non-negative") if t % 2 else ConstraintSet()
        ours = tv_prox(g, alpha, constraint, inner_iters=20000, inner_tol=1e-12)
        worst = max(worst, float(np.max(np.abs(ours - prox_oracle(g, alpha, constraint)))))
    g = rng.standard_normal((32, 32))
    ident = float(np.max(np.abs(tv_prox(g, 1e-12) - g)))
    decrease = []
    for alpha in (0.01, 0.1, 1.0):
        g = rng.standard_normal((32, 32))
        decrease.append(prox_objective(tv_prox(g, alpha), g, alpha) - prox_objective(g, g, alpha))
    return [_below("prox vs conic oracle 2x2 (max abs diff)", worst, 1e-4),
            _below("prox identity at alpha -> 0 (32x32)", ident, 1e-9),
            Check("prox objective below value at input (32x32)", max(decrease), 0.0,
                  bool(max(decrease) < 0), "<")]


# -- end to end ------------------------------------------------------------------

@dataclass
class EndToEnd:
    errors: dict
    data_fit: dict
    histories: dict
    wall_s: dict


def end_to_end_run(points: int = 64, outer_iters: int = 60, contrast: float = 0.2,
                   fine_factor: int = 2, jobs: int = 1, models=("seagle", "born", "rytov")) -> EndToEnd:
    """Shepp-Logan inversion with each data model under one iteration budget."""
    scene = fig4_scene(points)
    fine = scene.grid.refined(fine_factor)
    f_fine = make_shepp_logan(fine, contrast, scene.k_b, supersample=4)
    meas = synthesize_measurements(f_fine, scene.sources, scene.sensors, scene.k_b,
                                   recon_grid=scene.grid)
    truth = make_shepp_logan(scene.grid, contrast, scene.k_b, supersample=8)
    setup = ScatteringSetup(scene.grid, scene.k_b, scene.sources, scene.sensors)
    errors, fits, hists, walls = {}, {}, {}, {}
    for model in models:
        config = ReconstructionConfig(model=model, outer_iters=outer_iters,
                                      tau_rel=FIG4["tau_rel"])
        t0 = time.perf_counter()
        _, hist = reconstruct(config, meas, setup, ground_truth=truth, jobs=jobs)
        walls[model] = time.perf_counter() - t0
        errors[model] = hist.norm_error[-1]
        fits[model] = list(hist.norm_data_fit)
        hists[model] = hist
    return EndToEnd(errors, fits, hists, walls)


def fit_rise(fit) -> float:
    """Largest relative rise of the data fit above its running minimum."""
    fit = np.asarray(fit, dtype=float)
    running = np.minimum.accumulate(fit)
    return float(np.max(fit / running) - 1.0)


def end_to_end_checks(run: EndToEnd) -> list[Check]:
    e = run.errors
    fit = run.data_fit["seagle"]
    return [_below("end-to-end: SEAGLE error < Born error", e["seagle"], e["born"]),
            _below("end-to-end: SEAGLE error < Rytov error", e["seagle"], e["rytov"]),
            _below("end-to-end: SEAGLE data fit last/first", fit[-1] / fit[0], 1.0,
                   max_rise_over_running_min=fit_rise(fit),
                   argmin=int(np.argmin(fit)) + 1)]


def end_to_end(**kwargs) -> list[Check]:
    return end_to_end_checks(end_to_end_run(**kwargs))


SUITES = {
    "green-ops": green_ops,
    "gradient": gradient_suite,
    "forward-analytic": forward_analytic,
    "prox": prox_suite,
    "end-to-end": end_to_end,
}
