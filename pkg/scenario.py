"""Scenario files: JSON in, frozen dataclasses out, and back again.

A scenario holds the deployment, antenna, channel and link-budget settings
plus exactly one experiment block (``map``, ``latency``, ``mobility`` or
``survey``). Unknown keys are rejected with their dotted path so a typo
never silently falls back to a default.
"""

import dataclasses
import json
import logging
import typing
from dataclasses import dataclass, field
from typing import Optional

from antenna import ArrayConfig, CompositePattern, ElementPattern
from channel import ChannelParams, LinkBudget
from deployment import (DEFAULT_BEARINGS_DEG, DEFAULT_BS_HEIGHT_M, DEFAULT_ISD_M, DEFAULT_RINGS, DEFAULT_TX_POWER_DBM,
                        build_hex_layout)
from errors import ConfigurationError
from latency_engine import ASSOCIATIONS, HEIGHTS_M, LatencyScenario, LinkAdaptation, TrafficConfig
from mobility_engine import KMH, HandoverConfig, RlfConfig, Trajectory
from radio import FADING_MODES, GridSpec, build_scene
from stats_rng import DEFAULT_SEED

logger = logging.getLogger(__name__)

EXPERIMENTS = ("map", "latency", "mobility", "survey")
ROUTE_KINDS = ("random", "explicit", "sidelobe_escape")


@dataclass(frozen=True)
class LayoutConfig:
    isd_m: float = DEFAULT_ISD_M
    rings: int = DEFAULT_RINGS
    bs_height_m: float = DEFAULT_BS_HEIGHT_M
    wraparound: bool = False
    bearings_deg: tuple = DEFAULT_BEARINGS_DEG
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM


@dataclass(frozen=True)
class AntennaConfig:
    element: ElementPattern = field(default_factory=ElementPattern)
    array: ArrayConfig = field(default_factory=ArrayConfig)

    @property
    def pattern(self):
        return CompositePattern(element=self.element, array=self.array)


def _check_heights(heights, key_path):
    if not heights:
        raise ConfigurationError("at least one height is required", key_path)
    for h in heights:
        if not h > 0:
            raise ConfigurationError(f"heights must be > 0, got {h}", key_path)


def _check_fading(mode, key_path):
    if mode not in FADING_MODES:
        raise ConfigurationError(f"must be one of {FADING_MODES}, got {mode!r}", key_path)


@dataclass(frozen=True)
class MapExperiment:
    heights_m: tuple = (1.5, 50.0, 100.0, 150.0, 300.0)
    grid_points: int = 200
    half_width_m: Optional[float] = None
    fading_mode: str = "off"
    center_only: bool = False
    write_pgm: bool = True

    def __post_init__(self):
        _check_heights(self.heights_m, "map.heights_m")
        _check_fading(self.fading_mode, "map.fading_mode")
        if self.grid_points < 2:
            raise ConfigurationError("must be >= 2", "map.grid_points")
        if self.half_width_m is not None and not self.half_width_m > 0:
            raise ConfigurationError("must be > 0", "map.half_width_m")


@dataclass(frozen=True)
class LatencyExperiment:
    heights_m: tuple = HEIGHTS_M
    prbs: int = 6
    ues_per_cell: int = 5
    duration_ms: int = 60000
    association: str = "drop"
    fading_mode: str = "sampled"
    center_only: bool = False
    min_ue_distance_m: float = 35.0
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    link_adaptation: LinkAdaptation = field(default_factory=LinkAdaptation)

    def __post_init__(self):
        _check_heights(self.heights_m, "latency.heights_m")
        _check_fading(self.fading_mode, "latency.fading_mode")
        if self.prbs < 1:
            raise ConfigurationError("must be >= 1", "latency.prbs")
        if self.association not in ASSOCIATIONS:
            raise ConfigurationError(f"must be one of {ASSOCIATIONS}", "latency.association")
        if self.duration_ms < 1:
            raise ConfigurationError("must be >= 1", "latency.duration_ms")


@dataclass(frozen=True)
class MobilityExperiment:
    heights_m: tuple = (1.5, 150.0)
    speed_kmh: float = 30.0
    sample_dt_ms: float = 40.0
    fading_mode: str = "sampled"
    activity: float = 1.0
    routes: str = "random"
    n_routes: int = 200
    route_length_m: float = 2000.0
    extent_m: Optional[float] = None
    waypoints: tuple = ()
    duration_ms: float = 14000.0
    handover: HandoverConfig = field(default_factory=HandoverConfig)
    rlf: RlfConfig = field(default_factory=RlfConfig)

    def __post_init__(self):
        _check_heights(self.heights_m, "mobility.heights_m")
        _check_fading(self.fading_mode, "mobility.fading_mode")
        if self.routes not in ROUTE_KINDS:
            raise ConfigurationError(f"must be one of {ROUTE_KINDS}", "mobility.routes")
        if not self.speed_kmh > 0:
            raise ConfigurationError("must be > 0", "mobility.speed_kmh")
        if not 0 <= self.activity <= 1:
            raise ConfigurationError("must be in [0, 1]", "mobility.activity")
        if self.routes == "random" and (self.n_routes < 1 or not self.route_length_m > 0):
            raise ConfigurationError("random routes need n_routes >= 1 and route_length_m > 0", "mobility.n_routes")
        if self.routes == "explicit" and len(self.waypoints) < 2:
            raise ConfigurationError("explicit routes need at least 2 waypoints", "mobility.waypoints")
        if not self.duration_ms > 0:
            raise ConfigurationError("must be > 0", "mobility.duration_ms")

    @property
    def speed_mps(self):
        return self.speed_kmh * KMH


@dataclass(frozen=True)
class SurveyExperiment:
    heights_m: tuple = (1.5, 50.0, 100.0, 150.0)
    n_points: int = 2000
    center_only: bool = False

    def __post_init__(self):
        _check_heights(self.heights_m, "survey.heights_m")
        if self.n_points < 1:
            raise ConfigurationError("must be >= 1", "survey.n_points")


EXPERIMENT_TYPES = {
    "map": MapExperiment,
    "latency": LatencyExperiment,
    "mobility": MobilityExperiment,
    "survey": SurveyExperiment,
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    experiment: object
    name: str = "scenario"
    seed: int = DEFAULT_SEED
    out_dir: str = "results"
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    antenna: AntennaConfig = field(default_factory=AntennaConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    link_budget: LinkBudget = field(default_factory=LinkBudget)

    @property
    def pattern(self):
        return self.antenna.pattern


SECTIONS = {
    "layout": LayoutConfig,
    "antenna": AntennaConfig,
    "channel": ChannelParams,
    "link_budget": LinkBudget,
}


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _as_tuple(value):
    if isinstance(value, (list, tuple)):
        return tuple(_as_tuple(v) for v in value)
    return value


def _coerce(hint, value, path):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        options = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _coerce(options[0], value, path)
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)
    if hint is tuple:
        if not isinstance(value, list):
            raise ConfigurationError("expected a list", path)
        return _as_tuple(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"expected true or false, got {value!r}", path)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"expected an integer, got {value!r}", path)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"expected a number, got {value!r}", path)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"expected a string, got {value!r}", path)
        return value
    return value


def _build(cls, data, path):
    """Instantiate a config dataclass from a JSON object, rejecting unknown keys"""
    if not isinstance(data, dict):
        raise ConfigurationError("expected an object", path)
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls) if f.init]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigurationError("unknown key", _join(path, unknown[0]))
    kwargs = {name: _coerce(hints.get(name), value, _join(path, name)) for name, value in data.items()}
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc), path)


def parse_scenario(data):
    """Scenario from an already-decoded JSON object"""
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object")
    allowed = {"name", "seed", "out_dir"} | set(SECTIONS) | set(EXPERIMENTS)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigurationError("unknown key", unknown[0])
    blocks = [k for k in EXPERIMENTS if k in data]
    if not blocks:
        raise ConfigurationError(f"missing experiment block, expected one of {EXPERIMENTS}")
    if len(blocks) > 1:
        raise ConfigurationError(f"exactly one experiment block allowed, found {blocks}")
    kind = blocks[0]

    kwargs = {name: _build(cls, data[name], name) for name, cls in SECTIONS.items() if name in data}
    for key, hint in (("name", str), ("seed", int), ("out_dir", str)):
        if key in data:
            kwargs[key] = _coerce(hint, data[key], key)
    if "seed" in kwargs and not 0 <= kwargs["seed"] < 2 ** 64:
        raise ConfigurationError("must be a 64-bit unsigned integer", "seed")
    scenario = Scenario(kind=kind, experiment=_build(EXPERIMENT_TYPES[kind], data[kind], kind), **kwargs)
    if kind == "latency" and scenario.experiment.prbs > scenario.link_budget.n_prb_system:
        raise ConfigurationError(f"exceeds the {scenario.link_budget.n_prb_system} PRBs of the system", "latency.prbs")
    return scenario


def load_scenario(text):
    """Scenario from JSON text, defaults applied"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}")
    return parse_scenario(data)


def load_scenario_file(path):
    with open(path) as f:
        scenario = load_scenario(f.read())
    logger.debug("loaded %s scenario %r from %s", scenario.kind, scenario.name, path)
    return scenario


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def scenario_to_dict(scenario):
    """JSON-ready dict; parse_scenario(scenario_to_dict(s)) == s"""
    out = {"name": scenario.name, "seed": scenario.seed, "out_dir": scenario.out_dir}
    for name in SECTIONS:
        out[name] = _jsonable(dataclasses.asdict(getattr(scenario, name)))
    out[scenario.kind] = _jsonable(dataclasses.asdict(scenario.experiment))
    return out


def dump_scenario(scenario):
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True)


def apply_overrides(scenario, seed=None, out_dir=None, height=None, prbs=None, duration_ms=None, center_only=None):
    """Command-line overrides; each one only applies where the experiment has the setting"""
    experiment = scenario.experiment
    changes = {}
    if height is not None:
        changes["heights_m"] = (float(height),)
    if prbs is not None:
        if scenario.kind != "latency":
            raise ConfigurationError("--prbs only applies to latency scenarios")
        changes["prbs"] = prbs
    if duration_ms is not None:
        if scenario.kind not in ("latency", "mobility"):
            raise ConfigurationError("--duration-ms only applies to latency and mobility scenarios")
        changes["duration_ms"] = int(duration_ms) if scenario.kind == "latency" else float(duration_ms)
    if center_only:
        if not hasattr(experiment, "center_only"):
            raise ConfigurationError(f"--center-only does not apply to {scenario.kind} scenarios")
        changes["center_only"] = True
    if changes:
        experiment = dataclasses.replace(experiment, **changes)
    top = {"experiment": experiment}
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigurationError("must be a 64-bit unsigned integer", "seed")
        top["seed"] = seed
    if out_dir is not None:
        top["out_dir"] = out_dir
    return dataclasses.replace(scenario, **top)


def scene_for(scenario):
    """Deployment, sectors and propagation settings of a scenario as a radio.Scene"""
    lay = scenario.layout
    layout = build_hex_layout(lay.isd_m, lay.rings, lay.bs_height_m, lay.wraparound)
    return build_scene(layout=layout, pattern=scenario.pattern, channel=scenario.channel,
                       budget=scenario.link_budget, bearings=lay.bearings_deg, tx_power_dbm=lay.tx_power_dbm)


def latency_scenario_for(scenario, scene, height_m):
    exp = scenario.experiment
    return LatencyScenario(scene=scene, ue_height_m=height_m, ues_per_cell=exp.ues_per_cell, prb_pool=exp.prbs,
                           sim_duration_ms=exp.duration_ms, seed=scenario.seed, traffic=exp.traffic,
                           link=exp.link_adaptation, association=exp.association, fading_mode=exp.fading_mode,
                           center_only=exp.center_only, min_ue_distance_m=exp.min_ue_distance_m)


def map_grid_for(scenario):
    exp = scenario.experiment
    half = exp.half_width_m if exp.half_width_m is not None else 1.5 * scenario.layout.isd_m
    return GridSpec.centered(half, exp.grid_points)


def explicit_route(scenario, height_m):
    exp = scenario.experiment
    return Trajectory(waypoints=exp.waypoints, speed_mps=exp.speed_mps, height_m=height_m,
                      sample_dt_ms=exp.sample_dt_ms)
