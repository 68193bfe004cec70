"""Experiment configuration: a YAML (or JSON) document mapped onto dataclasses.

Unknown keys and type mismatches raise :class:`ConfigError` naming the
offending field, e.g. ``reconstruct.outer_iters: expected int, got 'ten'``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .forward import ForwardConfig
from .grid import (Grid, InvalidInputError, ScatteringPotential, SensorArray, SourceSpec,
                   homogeneous_potential, make_shepp_logan, wavenumber)
from .gridio import read_grid
from .inverse import ReconstructionConfig
from .presets import FIG4, Scene, analytic_scene, fig4_scene
from .tv import ConstraintSet


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


TAU_PRESETS = {"fig4": FIG4["tau_rel"], "paper-fig4": FIG4["tau_rel"]}


@dataclass
class GeometryConfig:
    preset: str | None = None
    points: int | None = None
    wavelength: float | None = None
    pixel_size: float | None = None
    counts: list[int] | None = None
    origin: list[float] | None = None
    sources: list[list[float]] | None = None
    sensors: list[list[float]] | None = None
    sensor_groups: list[int] | None = None


@dataclass
class PhantomConfig:
    kind: str = "shepp-logan"
    contrast: float = 0.2
    radius: float | None = None
    center: list[float] | None = None
    sign: float = -1.0
    supersample: int = 8
    path: str | None = None


@dataclass
class ForwardSection:
    max_iter: int = 120
    stop: str = "objective"
    objective_tol: float = 5e-7
    gradient_tol: float = 5e-7


@dataclass
class SynthesizeSection:
    fine_factor: int = 2
    snr_db: float | None = None
    tol: float = 1e-8
    allow_inverse_crime: bool = False


@dataclass
class ReconstructSection:
    model: str = "seagle"
    tau: float | str | None = "fig4"
    outer_iters: int = 50
    step: str = "backtracking"
    fixed_step: float | None = None
    constraint: str = "none"
    lo: float | None = None
    hi: float | None = None
    prox_iters: int = 100
    prox_tol: float = 1e-6
    warm_start_fields: bool = False
    init: str = "zero"


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    forward: ForwardSection = field(default_factory=ForwardSection)
    synthesize: SynthesizeSection = field(default_factory=SynthesizeSection)
    reconstruct: ReconstructSection = field(default_factory=ReconstructSection)
    seed: int = 0

    # -- derived objects ----------------------------------------------------

    def scene(self) -> Scene:
        g = self.geometry
        if g.preset == "fig4":
            return fig4_scene(g.points or FIG4["points"])
        if g.preset in ("analytic-2d", "analytic-3d"):
            return analytic_scene(2 if g.preset == "analytic-2d" else 3, g.points)
        if g.preset is not None:
            raise ConfigError("geometry.preset", f"unknown preset {g.preset!r}")
        for name in ("wavelength", "pixel_size", "counts", "sources", "sensors"):
            if getattr(g, name) is None:
                raise ConfigError(f"geometry.{name}", "required when no preset is given")
        k = wavenumber(g.wavelength)
        try:
            grid = Grid(tuple(g.counts), g.pixel_size, None if g.origin is None else tuple(g.origin))
            sources = tuple(SourceSpec.point(s, k) for s in g.sources)
            sensors = SensorArray(np.array(g.sensors, dtype=float), tuple(g.sensor_groups or ()))
        except InvalidInputError as exc:
            raise ConfigError("geometry", str(exc)) from exc
        return Scene(grid, k, g.wavelength, sources, sensors, 1.0, {"preset": None})

    def phantom_on(self, grid: Grid, scene: Scene) -> ScatteringPotential:
        p = self.phantom
        k = scene.k_b
        if p.kind == "zero":
            return ScatteringPotential.zeros(grid)
        if p.kind == "shepp-logan":
            return make_shepp_logan(grid, p.contrast, k, sign=p.sign, supersample=p.supersample)
        if p.kind in ("cylinder", "sphere"):
            radius = p.radius if p.radius is not None else scene.notes.get("radius")
            if radius is None:
                raise ConfigError("phantom.radius", "required for this geometry")
            n = np.sqrt(1.0 - np.sign(p.sign) * p.contrast)
            return homogeneous_potential(grid, radius, n, k, p.center, p.supersample)
        if p.kind == "file":
            if p.path is None:
                raise ConfigError("phantom.path", "required for kind 'file'")
            values, fgrid, _ = read_grid(p.path)
            if fgrid is None or fgrid.shape != grid.shape:
                raise ConfigError("phantom.path", "file grid does not match the target grid")
            return ScatteringPotential(grid, values.real)
        raise ConfigError("phantom.kind", f"unknown phantom kind {p.kind!r}")

    def forward_config(self) -> ForwardConfig:
        try:
            return ForwardConfig(**asdict(self.forward))
        except InvalidInputError as exc:
            raise ConfigError("forward", str(exc)) from exc

    def reconstruction_config(self) -> ReconstructionConfig:
        r = self.reconstruct
        tau, tau_rel = None, None
        if isinstance(r.tau, str):
            if r.tau not in TAU_PRESETS:
                raise ConfigError("reconstruct.tau", f"unknown preset {r.tau!r}; "
                                  f"known: {sorted(TAU_PRESETS)}")
            tau_rel = TAU_PRESETS[r.tau]
        elif r.tau is None:
            tau = 0.0
        else:
            tau = float(r.tau)
        try:
            constraint = ConstraintSet(r.constraint, -np.inf if r.lo is None else r.lo,
                                       np.inf if r.hi is None else r.hi)
            return ReconstructionConfig(
                tau=tau, tau_rel=tau_rel, outer_iters=r.outer_iters, step=r.step,
                fixed_step=r.fixed_step, constraint=constraint, forward=self.forward_config(),
                model=r.model, prox_iters=r.prox_iters, prox_tol=r.prox_tol,
                warm_start_fields=r.warm_start_fields, init=r.init)
        except InvalidInputError as exc:
            raise ConfigError("reconstruct", str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


# -- loading ----------------------------------------------------------------

def _convert(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and str(origin) == "<class 'types.UnionType'>"):
        if value is None and type(None) in args:
            return None
        errors = []
        for option in args:
            if option is type(None):
                continue
            try:
                return _convert(option, value, path)
            except ConfigError as exc:
                errors.append(exc)
        raise errors[-1] if errors else ConfigError(path, "no matching type")
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        return [_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected int, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported type {tp}")


def _build(cls, data, path=""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
    kwargs = {k: _convert(hints[k], v, f"{path}.{k}" if path else k) for k, v in data.items()}
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data)


PRESETS: dict[str, dict] = {
    "fig4": {"geometry": {"preset": "fig4"},
             "phantom": {"kind": "shepp-logan", "contrast": FIG4["contrast"]},
             "forward": {"max_iter": FIG4["forward_max_iter"],
                         "objective_tol": FIG4["forward_objective_tol"]},
             "reconstruct": {"tau": "fig4"}},
    "fig4-desk": {"geometry": {"preset": "fig4", "points": 64},
                  "phantom": {"kind": "shepp-logan", "contrast": FIG4["contrast"]},
                  "reconstruct": {"tau": "fig4", "outer_iters": 100}},
    "analytic-2d": {"geometry": {"preset": "analytic-2d"},
                    "phantom": {"kind": "cylinder", "contrast": 0.2}},
    "analytic-3d": {"geometry": {"preset": "analytic-3d"},
                    "phantom": {"kind": "sphere", "contrast": 0.2}},
}


def load_config(source) -> ExperimentConfig:
    """Load from a mapping, a file path, or a preset name (``fig4``, ``analytic-2d`` ...).

    A mapping or file may itself name a preset under the top-level key
    ``preset``; its remaining keys override the preset section by section.
    """
    if isinstance(source, dict):
        data = json.loads(json.dumps(source))
    else:
        p = Path(source)
        if not p.exists():
            if str(source) in PRESETS:
                return config_from_dict(PRESETS[str(source)])
            raise ConfigError("", f"config file {source} not found and not a preset name")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("", f"cannot parse {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("", "top level of the config must be a mapping")
    base = data.pop("preset", None)
    if base is not None:
        if base not in PRESETS:
            raise ConfigError("preset", f"unknown preset {base!r}")
        merged = json.loads(json.dumps(PRESETS[base]))
        for key, val in data.items():
            if isinstance(val, dict) and isinstance(merged.get(key), dict):
                merged[key].update(val)
            else:
                merged[key] = val
        data = merged
    return config_from_dict(data)
