"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` (the lines are printed
even without ``-s``). Expect a few minutes in total; the end-to-end inversion
dominates.
"""
import numpy as np
import pytest

from seagle.forward import ForwardConfig, incident_field, solve_forward
from seagle.gradient import value_and_gradient
from seagle.green import InteriorOperator, SensorOperator
from seagle.grid import Grid, SensorArray, SourceSpec, homogeneous_potential, wavenumber
from seagle.model import MeasurementSet
from seagle.presets import analytic_scene
from seagle.tv import tv_value
from seagle.validation import (Check, contrast_sweep, cross_oracle, end_to_end_checks, end_to_end_run,
                               forward_convergence, gradient_instance, gradient_suite, green_ops,
                               prox_suite, sweep_checks, zero_contrast)


def report(capsys, number: int, title: str, checks: list[Check]) -> None:
    ok = all(c.passed for c in checks)
    anchors = [c for c in checks if "regression anchor" in c.name]
    parts = []
    for c in checks:
        if c in anchors:
            continue
        extra = "".join(f", {k}={v:.3g}" for k, v in (c.extra or {}).items())
        parts.append(f"{c.name} {c.measured:.3g} {c.relation} {c.threshold:.3g}{extra}")
    if anchors:
        parts.append(f"regression anchors {sum(c.passed for c in anchors)}/{len(anchors)} within tolerance")
    detail = "; ".join(parts)
    with capsys.disabled():
        print(f"\ncriterion {number} {title}: {'PASS' if ok else 'FAIL'} | {detail}")
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)


def pinned(name: str, value: float, anchor: float, rtol: float) -> Check:
    dev = abs(value - anchor) / abs(anchor)
    return Check(f"{name} regression anchor {anchor:.4g}", dev, rtol, bool(dev < rtol), "<")


def test_criterion_1_operator_correctness(capsys):
    report(capsys, 1, "operator correctness", green_ops())


def _k_eff_full_size_cylinder(points: int = 128, c: float = 0.2) -> int:
    """Iterations for a cylinder kept at six wavelengths across on the reduced grid (informational)."""
    scene = analytic_scene(2, points)
    f = homogeneous_potential(scene.grid, 3.0 * scene.wavelength, np.sqrt(1.0 + c), scene.k_b, supersample=8)
    rec = solve_forward(f, incident_field(scene.sources[0], scene.grid), InteriorOperator(scene.grid, scene.k_b),
                        config=ForwardConfig(max_iter=1000))
    return rec.K_eff


def test_criterion_2_forward_convergence(capsys):
    check = forward_convergence(128, 0.2)
    # the gate uses the scene scaled with the grid (cylinder 3.07 wavelengths across); the
    # iteration count of the unscaled six-wavelength cylinder is reported alongside
    check.extra["K_eff_6_wavelength_cylinder"] = _k_eff_full_size_cylinder()
    report(capsys, 2, "forward convergence", [check])


# contrast -> (SEAGLE, Born, Rytov) normalized sensor errors from the first validated run
SWEEP_2D = {0.01: (7.06e-10, 6.89e-7, 8.3e-8), 0.05: (2.34e-8, 4.18e-4, 5.0e-5),
            0.1: (1.40e-7, 6.31e-3, 7.8e-4), 0.2: (2.23e-6, 8.50e-2, 1.15e-2),
            0.5: (1.69e-5, 1.357, 0.330), 1.0: (2.25e-4, 3.21, 3.35)}
SPOT_3D = (7.5e-7, 6.56e-2, 2.95e-2)


@pytest.mark.slow
def test_criterion_3_forward_accuracy_ordering(capsys):
    rows = contrast_sweep(points=128)
    checks = sweep_checks(rows, at=0.2, label="2D")
    for row in rows:
        for model, anchor in zip(("seagle", "born", "rytov"), SWEEP_2D[row["contrast"]]):
            checks.append(pinned(f"2D {row['contrast']:.0%} {model}", row[model], anchor, 0.05))
    spot = contrast_sweep(points=64, contrasts=(0.2,), dim=3)
    checks += sweep_checks(spot, at=0.2, label="3D 64^3")
    for model, anchor in zip(("seagle", "born", "rytov"), SPOT_3D):
        checks.append(pinned(f"3D 20% {model}", spot[0][model], anchor, 0.05))
    report(capsys, 3, "forward accuracy ordering", checks)


def test_criterion_4_gradient_exactness(capsys):
    report(capsys, 4, "gradient exactness", gradient_suite())


@pytest.mark.slow
def test_criterion_5_cross_oracle(capsys):
    report(capsys, 5, "cross-oracle agreement", cross_oracle(0.1, (128, 256)))


def test_criterion_6_tv_prox(capsys):
    report(capsys, 6, "TV prox", prox_suite())


# final normalized reconstruction errors after 60 outer iterations, first validated run
END_TO_END = {"seagle": 0.3494, "born": 0.3970, "rytov": 0.3670}


@pytest.mark.slow
def test_criterion_7_end_to_end(capsys):
    run = end_to_end_run(points=64, outer_iters=60, contrast=0.2)
    checks = end_to_end_checks(run)
    for model, anchor in END_TO_END.items():
        checks.append(pinned(f"end-to-end {model}", run.errors[model], anchor, 0.03))
    report(capsys, 7, "end-to-end inversion", checks)


def test_criterion_8_trivial_physics(capsys):
    checks = zero_contrast()
    k = wavenumber(74.9e-3)
    grid = Grid((16, 16), 4.8e-3)
    sensors = SensorArray.ring(0.1, 12)
    src = SourceSpec.point((-0.15, 0.02), k)
    rec = solve_forward(np.zeros(grid.shape), incident_field(src, grid), InteriorOperator(grid, k),
                        SensorOperator(grid, sensors, k), incident_field(src, sensors))
    u_in_s = incident_field(src, sensors)
    checks.append(Check("f = 0: u_hat == u_in (16x16 ring)", float(np.max(np.abs(rec.u_hat - u_in_s))),
                        0.0, bool(np.array_equal(rec.u_hat, u_in_s)), "=="))

    f, meas, setup, config = gradient_instance()
    records = setup.forward(f, config)
    matched = MeasurementSet(meas.sources, meas.sensors, np.stack([r.u_hat for r in records]))
    value, grad, _ = value_and_gradient(f, matched, setup, config)
    checks.append(Check("u_hat == m: data term and gradient vanish",
                        float(value + np.max(np.abs(grad))), 0.0, bool(value == 0 and not np.any(grad)), "=="))

    tvs = [tv_value(np.full(shape, c)) for shape in ((8, 8), (5, 6, 7)) for c in (0.0, -3.7, 1e8)]
    checks.append(Check("TV of constants", float(max(tvs)), 0.0, all(t == 0.0 for t in tvs), "=="))
    report(capsys, 8, "trivial physics", checks)


@pytest.mark.parametrize("number", range(1, 9))
def test_every_criterion_has_a_test(number):
    assert any(name.startswith(f"test_criterion_{number}_") for name in globals())
