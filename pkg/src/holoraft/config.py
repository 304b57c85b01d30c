"""Run configuration: one YAML file, dataclass defaults, flag overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .controller import ControlGains, PhysicalParams
from .geometry import ModuleGeometry
from .potential_solver import SolverConfig
from .simulator import ExperimentSpec, Leg, SimConfig, presets
from .structure import Structure, structure_from_layout
from .transition_solver import TransitionConfig


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class StatsConfig:
    sides: tuple[int, ...] = (2, 3, 4, 5)
    trials: dict = field(default_factory=lambda: {2: 10000, 3: 10000,
                                                  4: 1000, 5: 1000})
    condition_margin: float = 0.1
    check_margin: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    tables_dir: str = "tables"
    geometry: ModuleGeometry = field(default_factory=ModuleGeometry)
    region_resolution: float = 0.1
    layout: tuple[str, ...] = ("XXX",)
    solver: SolverConfig = field(default_factory=SolverConfig)
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    gains: ControlGains = field(default_factory=ControlGains)
    sim: SimConfig = field(default_factory=SimConfig)
    experiment: ExperimentSpec = field(
        default_factory=lambda: presets()["test1"])
    initial_yaw: float | None = None
    literal_square_drag: bool = False
    stats: StatsConfig = field(default_factory=StatsConfig)

    def structure(self) -> Structure:
        return structure_from_layout(self.layout, self.geometry.lattice_pitch)


def _take(mapping: dict, key: str, cls, **extra):
    sub = dict(mapping.pop(key, {}) or {})
    sub.update(extra)
    try:
        return cls(**sub)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad '{key}' section: {exc}") from exc


def _parse_experiment(raw) -> ExperimentSpec:
    if raw is None:
        return presets()["test1"]
    if isinstance(raw, str):
        if raw not in presets():
            raise ConfigError(f"unknown preset {raw!r}; "
                              f"choose from {sorted(presets())}")
        return presets()[raw]
    raw = dict(raw)
    if "preset" in raw and raw["preset"]:
        return _parse_experiment(raw["preset"])
    legs = raw.get("legs")
    if not legs:
        raise ConfigError("experiment needs a 'preset' or a 'legs' list")
    parsed = []
    for leg in legs:
        try:
            parsed.append(Leg((float(leg["v"][0]), float(leg["v"][1])),
                              float(leg["theta"]), float(leg["duration"])))
        except (KeyError, TypeError, IndexError) as exc:
            raise ConfigError(f"bad experiment leg {leg!r}: {exc}") from exc
    return ExperimentSpec(str(raw.get("name", "custom")), tuple(parsed))


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional YAML file plus flag overrides."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{p} must hold a mapping at the top level")
    raw = dict(raw)
    overrides = overrides or {}

    geometry = _take(raw, "geometry", ModuleGeometry)
    solver_raw = dict(raw.pop("solver", {}) or {})
    if "weights" in solver_raw:
        solver_raw["weights"] = tuple(float(w) for w in solver_raw["weights"])
    if "repulsive_profile" in solver_raw:
        solver_raw["repulsive_profile"] = tuple(
            (float(t), float(s)) for t, s in solver_raw["repulsive_profile"])
    try:
        solver = SolverConfig(**solver_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad 'solver' section: {exc}") from exc
    transition = _take(raw, "transition", TransitionConfig)
    gains = _take(raw, "gains", ControlGains)
    phys = _take(raw, "physical", PhysicalParams)

    sim_raw = dict(raw.pop("sim", {}) or {})
    literal_square = bool(sim_raw.pop("literal_square_drag", False))
    if sim_raw.get("noise") is not None:
        sim_raw["noise"] = tuple(float(v) for v in sim_raw["noise"])
    sim_raw.setdefault("t_trans", transition.t_trans)
    try:
        sim = SimConfig(phys=phys, **sim_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad 'sim' section: {exc}") from exc

    exp_raw = raw.pop("experiment", None)
    initial_yaw = None
    if isinstance(exp_raw, dict):
        iy = exp_raw.pop("initial_yaw", None)
        initial_yaw = None if iy is None else float(iy)
    experiment = _parse_experiment(exp_raw)

    stats_raw = dict(raw.pop("transition_stats", {}) or {})
    if "sides" in stats_raw:
        stats_raw["sides"] = tuple(int(s) for s in stats_raw["sides"])
    if "trials" in stats_raw:
        stats_raw["trials"] = {int(k): int(v)
                               for k, v in dict(stats_raw["trials"]).items()}
    try:
        stats = StatsConfig(**stats_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad 'transition_stats' section: {exc}") from exc

    layout = raw.pop("layout", ("XXX",))
    if isinstance(layout, str):
        layout = (layout,)
    cfg_kwargs = {
        "seed": int(raw.pop("seed", 0)),
        "out_dir": str(raw.pop("out_dir", "out")),
        "tables_dir": str(raw.pop("tables_dir", "tables")),
        "geometry": geometry,
        "region_resolution": float(raw.pop("region_resolution", 0.1)),
        "layout": tuple(str(r) for r in layout),
        "solver": solver,
        "transition": transition,
        "gains": gains,
        "sim": sim,
        "experiment": experiment,
        "initial_yaw": initial_yaw,
        "literal_square_drag": literal_square,
        "stats": stats,
    }
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    cfg_kwargs.update(overrides)

    cfg = RunConfig(**cfg_kwargs)
    try:
        cfg.structure()
    except ValueError as exc:
        raise ConfigError(f"bad layout: {exc}") from exc
    if not math.isclose(cfg.solver.delta_d, 0.1, rel_tol=0, abs_tol=1e-12):
        # The DoC tables are built on a fixed 0.1 grid; other step sizes
        # would silently decouple the solver from its lookups.
        raise ConfigError("solver.delta_d must equal the table grid (0.1)")
    return cfg
