"""``seagle`` command line: forward, synthesize, reconstruct, validate.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 solver failure, 4 inverse-crime refusal, 5 geometry mismatch.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .analytic import TruncationError
from .config import ConfigError, ExperimentConfig, load_config
from .forward import BreakdownError
from .grid import GeometryError, InvalidInputError
from .gridio import write_grid
from .inverse import RytovTransformError, reconstruct, with_model
from .model import MeasurementSet, ScatteringSetup
from .oracles import InverseCrimeError, NonConvergenceError, synthesize_measurements
from .validation import SUITES

log = logging.getLogger("seagle")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER, EXIT_CRIME, EXIT_GEOMETRY = 0, 1, 2, 3, 4, 5
OUT_ENV = "SEAGLE_OUT"


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    config: dict
    scene: dict
    versions: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - t0

    def write(self, directory: Path) -> Path:
        path = directory / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=str))
        return path


def _versions() -> dict:
    try:
        own = metadata.version("seagle")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"seagle": own, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _run_dir(args, command: str, cfg: ExperimentConfig) -> Path:
    if args.out is not None:
        d = Path(args.out)
    else:
        root = Path(os.environ.get(OUT_ENV, "runs"))
        d = root / f"{command}-{cfg.digest()[:10]}-s{cfg.seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _prepare(args, command):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    scene = cfg.scene()
    out = _run_dir(args, command, cfg)
    manifest = RunManifest(command, cfg.digest(), cfg.seed, cfg.to_dict(), scene.to_dict(),
                           _versions(), {"config": str(args.config)})
    return cfg, scene, out, manifest


def _jobs(args) -> int:
    return max(1, args.jobs if args.jobs is not None else (os.cpu_count() or 1))


# -- commands ---------------------------------------------------------------

def cmd_forward(args) -> int:
    cfg, scene, out, manifest = _prepare(args, "forward")
    setup = ScatteringSetup(scene.grid, scene.k_b, scene.sources, scene.sensors)
    with manifest.stage("phantom"):
        f = cfg.phantom_on(scene.grid, scene)
    with manifest.stage("forward"):
        records = setup.forward(f, cfg.forward_config(), jobs=_jobs(args))
    with manifest.stage("write"):
        names = [write_grid(out / "f", f.values, scene.grid)]
        summary = []
        for i, rec in enumerate(records):
            names.append(write_grid(out / f"u_hat_{i:03d}", rec.u_hat, source=i))
            names.append(write_grid(out / f"u_in_{i:03d}", setup.u_in_sensors[i], source=i))
            names.append(write_grid(out / f"u_K_{i:03d}", rec.u_K, scene.grid, source=i))
            summary.append({"source": i, "K_eff": rec.K_eff, "converged": rec.converged,
                            "residual_norm": rec.residual_norm,
                            "initial_residual_norm": rec.initial_residual_norm,
                            "objective": [float(o) for o in rec.objective_history]})
        (out / "residuals.json").write_text(json.dumps(summary, indent=2))
        manifest.outputs = [str(p) for p in names] + [str(out / "residuals.json")]
    manifest.write(out)
    unconverged = [s["source"] for s in summary if not s["converged"]]
    if unconverged:
        log.warning("forward solve hit max_iter for sources %s", unconverged)
    print(out)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg, scene, out, manifest = _prepare(args, "synthesize")
    s = cfg.synthesize
    if s.fine_factor <= 1 and not s.allow_inverse_crime:
        raise InverseCrimeError("synthesize.fine_factor must exceed 1 "
                                "(or set synthesize.allow_inverse_crime)")
    fine = scene.grid.refined(max(1, s.fine_factor))
    with manifest.stage("phantom"):
        f_fine = cfg.phantom_on(fine, scene)
    with manifest.stage("direct-solve"):
        meas = synthesize_measurements(f_fine, scene.sources, scene.sensors, scene.k_b,
                                       recon_grid=scene.grid, snr_db=s.snr_db, seed=cfg.seed,
                                       tol=s.tol, allow_inverse_crime=s.allow_inverse_crime)
    with manifest.stage("write"):
        target = meas.save(out / "measurements")
        write_grid(out / "f_fine", f_fine.values, fine)
    manifest.outputs = [str(target), str(out / "f_fine.json")]
    manifest.write(out)
    print(target)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg, scene, out, manifest = _prepare(args, "reconstruct")
    if args.measurements is None:
        raise ConfigError("--measurements", "required for reconstruct")
    mdir = Path(args.measurements)
    if not (mdir / "measurements.json").exists():
        raise ConfigError("--measurements", f"{mdir} is not a measurement directory")
    manifest.inputs["measurements"] = str(mdir)
    rcfg = cfg.reconstruction_config()
    if args.model is not None:
        rcfg = with_model(rcfg, args.model)
    manifest.config["reconstruct"]["model"] = rcfg.model
    meas = MeasurementSet.load(mdir)
    setup = ScatteringSetup(scene.grid, scene.k_b, scene.sources, scene.sensors)
    meas.check_compatible(setup)
    truth = cfg.phantom_on(scene.grid, scene).values
    if not np.any(truth):
        truth = None
    with manifest.stage("reconstruct"):
        f_hat, hist = reconstruct(rcfg, meas, setup, ground_truth=truth, jobs=_jobs(args))
    write_grid(out / "f_hat", f_hat, scene.grid, model=rcfg.model)
    hist.to_csv(out / "history.csv")
    manifest.outputs = [str(out / "f_hat.json"), str(out / "history.csv")]
    if hist.warnings:
        manifest.inputs["warnings"] = hist.warnings
    manifest.write(out)
    print(out)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
    t0 = time.perf_counter()
    kwargs = {"jobs": _jobs(args)} if args.suite == "end-to-end" else {}
    checks = SUITES[args.suite](**kwargs)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    if args.out is not None or OUT_ENV in os.environ:
        d = Path(args.out) if args.out is not None else Path(os.environ[OUT_ENV]) / f"validate-{args.suite}"
        d.mkdir(parents=True, exist_ok=True)
        report = {"suite": args.suite, "passed": ok, "wall_s": time.perf_counter() - t0,
                  "versions": _versions(), "checks": [asdict(c) for c in checks]}
        (d / "report.json").write_text(json.dumps(report, indent=2, default=float))
    print(f"{args.suite}: {'PASS' if ok else 'FAIL'} ({sum(c.passed for c in checks)}/{len(checks)})")
    return EXIT_OK if ok else EXIT_FAILED


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=None,
                        help="concurrent per-source solves (default: all cores)")
    common.add_argument("--out", default=None,
                        help=f"run directory (default: ${OUT_ENV} or ./runs, plus a config-hash name)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="seagle", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("forward", "simulate sensor fields with the accelerated forward model"),
                           ("synthesize", "make measurements with a direct solve on a finer grid"),
                           ("reconstruct", "TV-regularized inversion of a measurement directory")]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--config", required=True, help="YAML/JSON file or preset name")
        if name == "reconstruct":
            sp.add_argument("--measurements", required=True)
            sp.add_argument("--model", choices=("seagle", "born", "rytov"), default=None)
    sp = sub.add_parser("validate", parents=[common], help="run an oracle comparison suite")
    sp.add_argument("suite", help=", ".join(SUITES))
    sp.add_argument("--config", default=None, help="accepted for symmetry; suites are self-contained")
    return p


COMMANDS = {"forward": cmd_forward, "synthesize": cmd_synthesize,
            "reconstruct": cmd_reconstruct, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InverseCrimeError as exc:
        print(f"inverse crime: {exc}", file=sys.stderr)
        return EXIT_CRIME
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (BreakdownError, NonConvergenceError, TruncationError, RytovTransformError,
            FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
