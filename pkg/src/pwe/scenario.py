"""Scenario documents: schema, parsing, canonical form and runtime builders.

Every physical quantity carries its unit in the key name. Unknown keys are
rejected. Channel defaults are 60 GHz, 30 dBm transmit power, 50 bounces
and a -250 dBm floor.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import em
from .channel import ChannelParams, dbm_to_w
from .errors import GeometryError, ScenarioInvalid, ScenarioParseError
from .geometry import Box, Floorplan, RectilinearHall, Surface, tile_surface
from .graph import Antenna, CodebookSpec, PweGraph, UserNode, build_graph
from .optimizers import METRICS, UserObjective
from .sim import BroadcastChannel, SimSetup, Trajectory

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HallSpec(_Strict):
    """Extruded rectilinear outline, counter-clockwise, axis-aligned edges."""

    outline_m: list[Vec2] = Field(min_length=4)
    ceilings_m: list[tuple[float, float, float, float]] = Field(min_length=1)
    solids_m: list[tuple[float, float, float, float]] = []
    height_m: float = Field(3.0, gt=0)
    bare_ceilings: list[int] = []
    racks_m: list[tuple[float, float, float, float, float]] = []
    coated_walls: bool = True
    coated_ceiling: bool = True


class SurfaceSpec(_Strict):
    surface_id: str
    origin_m: Vec3
    edge_u_m: Vec3
    edge_v_m: Vec3
    normal: Optional[Vec3] = None
    coated: bool = True
    specular_efficiency: float = Field(1.0, gt=0, le=1)


class BoxSpec(_Strict):
    lo_m: Vec3
    hi_m: Vec3


class FloorplanSpec(_Strict):
    hall: Optional[HallSpec] = None
    surfaces: list[SurfaceSpec] = []
    obstacles: list[BoxSpec] = []
    collimating: bool = True

    @model_validator(mode="after")
    def _nonempty(self):
        if self.hall is None and not self.surfaces:
            raise ValueError("floorplan needs a hall or at least one surface")
        return self


class FunctionSpec(_Strict):
    function_id: str
    template: str
    in_port: Optional[str] = None
    out_ports: list[str] = []
    bias: list[int] = []
    efficiency: float = Field(1.0, gt=0, le=1)
    phase_rad: float = 0.0


class CodebookModel(_Strict):
    rows: int = Field(8, ge=1)
    cols: int = Field(8, ge=1)
    levels: int = Field(4, ge=2)
    steer_efficiency: float = Field(0.9, gt=0, le=1)
    templates: list[str] = list(em.TEMPLATES)
    entries: list[FunctionSpec] = []

    @field_validator("templates")
    @classmethod
    def _known(cls, v):
        bad = [t for t in v if t not in em.TEMPLATES]
        if bad:
            raise ValueError(f"unknown templates {bad}")
        return v

    def build(self) -> CodebookSpec:
        entries = tuple(em.EmFunction(f.function_id, f.template, f.in_port, tuple(f.out_ports), tuple(f.bias),
                                      f.efficiency, f.phase_rad) for f in self.entries)
        return CodebookSpec(self.rows, self.cols, self.levels, self.steer_efficiency, tuple(self.templates), entries)


class TilesSpec(_Strict):
    side_length_m: float = Field(1.0, gt=0)
    allow_truncation: bool = False
    codebooks: dict[str, CodebookModel] = {"default": CodebookModel()}
    surface_codebooks: dict[str, str] = {}    # surface id -> codebook name, else "default"


class AntennaSpec(_Strict):
    kind: Literal["isotropic", "horn"] = "isotropic"
    boresight: Vec3 = (0.0, 0.0, 1.0)
    beamwidth_deg: float = Field(80.0, gt=0, lt=180)
    sidelobe: float = Field(1e-3, ge=0, le=1)
    efficiency: float = Field(1.0, gt=0, le=1)


class TrajectorySpec(_Strict):
    waypoints_m: list[Vec3] = Field(min_length=2)
    speed_mps: float = Field(gt=0)
    start_time_s: float = Field(0.0, ge=0)


class UserSpec(_Strict):
    user_id: str = Field(min_length=1)
    position_m: Vec3
    antenna: AntennaSpec = AntennaSpec()
    trajectory: Optional[TrajectorySpec] = None


class ChannelSpec(_Strict):
    frequency_hz: float = Field(60e9, gt=0)
    tx_power_dbm: float = 30.0
    min_power_dbm: float = -250.0
    max_bounces: int = Field(50, ge=1)
    a_near: float = 1.0
    a_far: float = 2.0
    near_field_radius_m: float = Field(2.0, ge=0)
    unintended_fraction: float = Field(em.UNINTENDED_FRACTION, ge=0, le=1)
    include_los: bool = True
    los_clearance: float = Field(0.6, gt=0)

    @model_validator(mode="after")
    def _exponents(self):
        if not self.a_near < self.a_far <= 2:
            raise ValueError("need a_near < a_far <= 2")
        return self


class ObjectiveSpec(_Strict):
    tx_id: str
    rx_id: str
    metrics: list[str] = ["max_rx_power"]
    weights: dict[str, float] = {}
    max_functions_per_tile: Optional[int] = Field(None, ge=1)
    forbidden_links: list[str] = []
    eavesdropper_id: Optional[str] = None
    eavesdropper_radius_m: float = Field(0.0, ge=0)
    perpendicular: bool = False
    perpendicular_tolerance: float = Field(0.1, ge=0)

    @field_validator("metrics")
    @classmethod
    def _metrics(cls, v):
        bad = [m for m in v if m not in METRICS]
        if bad or not v:
            raise ValueError(f"unknown or missing metrics {bad}; known: {sorted(METRICS)}")
        return v


class OptimizerSpec(_Strict):
    name: Literal["kpaths", "lexi", "explorer", "backprop"] = "kpaths"
    k: int = Field(1, ge=1)
    paths_per_pair: int = Field(1, ge=1)
    fallback_min_cos: bool = True
    prefer_reuse: bool = True
    explorer_rounds: int = Field(50, ge=1)
    explorer_fanout: int = Field(8, ge=1)
    backprop_walls: list[list[str]] = []
    backprop_target_w: list[float] = []
    backprop_epochs: int = Field(2000, ge=1)
    learning_rate: float = Field(0.5, gt=0)

    @model_validator(mode="after")
    def _paths(self):
        if self.paths_per_pair > self.k:
            raise ValueError("paths_per_pair must not exceed k")
        return self


class BroadcastSpec(_Strict):
    rate_bps: float = Field(360e3, gt=0)
    command_size_bits: int = Field(360, ge=1)
    tile_capacity: int = Field(1000, ge=1)
    deploy_latency_s: Optional[float] = Field(None, ge=0)


class SimulationSpec(_Strict):
    tx_id: Optional[str] = None
    rx_id: Optional[str] = None
    time_step_s: float = Field(0.05, gt=0)
    duration_s: Optional[float] = Field(None, gt=0)
    seed: int = 0
    idle_function: Optional[str] = em.ABSORB
    perpendicular_tolerance: float = Field(0.1, ge=0)


class RouteSpec(_Strict):
    tx_id: str
    rx_id: str
    nodes: list[str] = Field(min_length=2)


class ScheduleSpec(_Strict):
    """Explicit desk-scale update instance; without it the scenario graph is used."""

    nodes: list[str] = []
    edges: list[tuple[str, str]] = []
    endpoints: list[str] = []
    pairs_per_round: list[list[tuple[str, str]]] = []
    initial_routes: list[RouteSpec] = []
    max_tiles: int = Field(15, ge=1)
    max_rounds: int = Field(4, ge=1)
    max_pairs: int = Field(4, ge=1)
    relax_attempts: int = Field(200, ge=1)


class ScenarioFile(_Strict):
    name: str = "scenario"
    floorplan: FloorplanSpec
    tiles: TilesSpec = TilesSpec()
    users: list[UserSpec] = Field(min_length=1)
    channel: ChannelSpec = ChannelSpec()
    objectives: list[ObjectiveSpec] = []
    optimizer: OptimizerSpec = OptimizerSpec()
    broadcast: BroadcastSpec = BroadcastSpec()
    simulation: SimulationSpec = SimulationSpec()
    schedule: Optional[ScheduleSpec] = None

    @model_validator(mode="after")
    def _references(self):
        ids = [u.user_id for u in self.users]
        problems = []
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            problems.append(f"duplicate user ids {dup}")
        known = set(ids)
        for i, ob in enumerate(self.objectives):
            for key in ("tx_id", "rx_id", "eavesdropper_id"):
                v = getattr(ob, key)
                if v is not None and v not in known:
                    problems.append(f"objectives.{i}.{key} names unknown user {v!r}")
        for key in ("tx_id", "rx_id"):
            v = getattr(self.simulation, key)
            if v is not None and v not in known:
                problems.append(f"simulation.{key} names unknown user {v!r}")
        for name in self.tiles.surface_codebooks.values():
            if name not in self.tiles.codebooks:
                problems.append(f"tiles.surface_codebooks refers to unknown codebook {name!r}")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def sim_pair(self) -> tuple[str, str]:
        tx, rx = self.simulation.tx_id, self.simulation.rx_id
        if (tx is None or rx is None) and self.objectives:
            tx = tx or self.objectives[0].tx_id
            rx = rx or self.objectives[0].rx_id
        if tx is None or rx is None:
            raise ScenarioInvalid([("simulation", "no tx_id/rx_id and no objective to take them from")])
        return tx, rx


# ---------------------------------------------------------------- parsing

def _line_of(text: str, loc: tuple) -> int | None:
    keys = [k for k in loc if isinstance(k, str)]
    for key in reversed(keys):
        m = re.search(rf'"{re.escape(key)}"\s*:', text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    return None


def parse_scenario_text(text: str) -> ScenarioFile:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, exc.lineno, exc.colno) from None
    try:
        return ScenarioFile.model_validate(raw)
    except ValidationError as exc:
        diags = []
        for e in exc.errors():
            loc = ".".join(str(p) for p in e["loc"]) or "<root>"
            line = _line_of(text, e["loc"])
            diags.append((loc if line is None else f"{loc} (line {line})", e["msg"]))
        raise ScenarioInvalid(diags) from None


def parse_scenario(path) -> ScenarioFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario_text(text)


def serialize_scenario(scenario: ScenarioFile) -> str:
    """Canonical text: defaults filled, keys sorted, two-space indent."""
    return json.dumps(scenario.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def builtin_scenario(name: str = "factory") -> ScenarioFile:
    text = resources.files("pwe").joinpath("scenarios").joinpath(f"{name}.json").read_text()
    return parse_scenario_text(text)


# ---------------------------------------------------------------- builders

def build_floorplan(scenario: ScenarioFile) -> Floorplan:
    fs = scenario.floorplan
    walls, obstacles, height = [], [], 3.0
    try:
        if fs.hall is not None:
            h = fs.hall
            hall = RectilinearHall(outline=[tuple(p) for p in h.outline_m], ceiling_rects=[tuple(r) for r in h.ceilings_m],
                                   solid_rects=[tuple(r) for r in h.solids_m], height=h.height_m,
                                   coated_ceiling=h.coated_ceiling, coated_walls=h.coated_walls,
                                   collimating=fs.collimating, bare_ceilings=tuple(h.bare_ceilings),
                                   racks=[tuple(r) for r in h.racks_m])
            base = hall.floorplan()
            walls, obstacles, height = list(base.walls), list(base.obstacles), base.ceiling_height
        for s in fs.surfaces:
            walls.append(Surface(s.surface_id, s.origin_m, s.edge_u_m, s.edge_v_m, s.normal, s.coated,
                                 fs.collimating, s.specular_efficiency))
        obstacles += [Box(b.lo_m, b.hi_m) for b in fs.obstacles]
        if fs.hall is None:
            lo = np.min([np.minimum(np.array(s.origin_m), np.array(s.origin_m) + np.array(s.edge_u_m)
                                    + np.array(s.edge_v_m)) for s in fs.surfaces], axis=0)
            hi = np.max([np.maximum(np.array(s.origin_m), np.array(s.origin_m) + np.array(s.edge_u_m)
                                    + np.array(s.edge_v_m)) for s in fs.surfaces], axis=0)
            height = max(float(hi[2] - lo[2]), 1e-3)
        return Floorplan(tuple(walls), tuple(obstacles), height)
    except GeometryError as exc:
        raise ScenarioInvalid([("floorplan", str(exc))]) from None


def build_users(scenario: ScenarioFile) -> list[UserNode]:
    return [UserNode(u.user_id, tuple(u.position_m),
                     Antenna(u.antenna.kind, tuple(u.antenna.boresight), u.antenna.beamwidth_deg,
                             u.antenna.sidelobe, u.antenna.efficiency))
            for u in scenario.users]


def _inside(fp: Floorplan, p) -> str | None:
    p = np.asarray(p, dtype=float)
    lo, hi = fp.bounds()
    if np.any(p < lo - 1e-9) or np.any(p > hi + 1e-9):
        return "lies outside the floorplan"
    for box in fp.obstacles:
        if np.all(p > np.array(box.lo) + 1e-9) and np.all(p < np.array(box.hi) - 1e-9):
            return "lies inside an obstacle"
    return None


def check_placement(scenario: ScenarioFile, fp: Floorplan) -> None:
    diags = []
    for i, u in enumerate(scenario.users):
        why = _inside(fp, u.position_m)
        if why:
            diags.append((f"users.{i}.position_m", why))
        if u.trajectory is not None:
            pts = np.array(u.trajectory.waypoints_m)
            for j, (a, b) in enumerate(zip(pts, pts[1:])):
                for f in np.linspace(0.0, 1.0, 9):
                    why = _inside(fp, a + f * (b - a))
                    if why:
                        diags.append((f"users.{i}.trajectory.waypoints_m.{j}", f"leg {why}"))
                        break
    if diags:
        raise ScenarioInvalid(diags)


def build_scenario_graph(scenario: ScenarioFile) -> PweGraph:
    fp = build_floorplan(scenario)
    check_placement(scenario, fp)
    ts = scenario.tiles
    placements, codebooks = [], {}
    try:
        for s in fp.walls:
            placements += tile_surface(s, ts.side_length_m, ts.allow_truncation)
            if s.coated:
                codebooks[s.surface_id] = ts.codebooks[ts.surface_codebooks.get(s.surface_id, "default")].build()
    except GeometryError as exc:
        raise ScenarioInvalid([("tiles", str(exc))]) from None
    except KeyError as exc:
        raise ScenarioInvalid([("tiles.codebooks", f"no codebook named {exc}")]) from None
    unknown = set(ts.surface_codebooks) - {s.surface_id for s in fp.walls}
    if unknown:
        raise ScenarioInvalid([("tiles.surface_codebooks", f"unknown surfaces {sorted(unknown)}")])
    return build_graph(fp, placements, build_users(scenario), codebooks, scenario.channel.frequency_hz,
                       scenario.channel.los_clearance)


def channel_params(scenario: ScenarioFile) -> ChannelParams:
    c = scenario.channel
    return ChannelParams(c.frequency_hz, dbm_to_w(c.tx_power_dbm), c.min_power_dbm, c.max_bounces, c.a_near,
                         c.a_far, c.near_field_radius_m, c.unintended_fraction, c.include_los)


def objectives(scenario: ScenarioFile) -> list[UserObjective]:
    """Objectives at the users' listed positions; a perpendicular objective follows the receiver's first leg."""
    users = {u.user_id: u for u in scenario.users}
    out = []
    for i, o in enumerate(scenario.objectives):
        heading = None
        if o.perpendicular:
            tr = users[o.rx_id].trajectory
            legs = [] if tr is None else [np.subtract(b, a) for a, b in zip(tr.waypoints_m, tr.waypoints_m[1:])]
            legs = [v for v in legs if np.linalg.norm(v) > 0]
            if not legs:
                raise ScenarioInvalid([(f"objectives.{i}.perpendicular", "receiver has no moving trajectory")])
            heading = tuple(float(x) for x in legs[0])
        out.append(UserObjective(o.tx_id, o.rx_id, tuple(o.metrics), dict(o.weights), o.max_functions_per_tile,
                                 frozenset(o.forbidden_links), o.eavesdropper_id, o.eavesdropper_radius_m,
                                 trajectory=heading, perpendicular=o.perpendicular,
                                 perpendicular_tolerance=o.perpendicular_tolerance))
    return out


def sim_setup(scenario: ScenarioFile, seed: int | None = None) -> SimSetup:
    tx, rx = scenario.sim_pair
    user = next(u for u in scenario.users if u.user_id == rx)
    if user.trajectory is None:
        raise ScenarioInvalid([(f"users.{scenario.users.index(user)}.trajectory", "receiver has no trajectory")])
    tr, b, s = user.trajectory, scenario.broadcast, scenario.simulation
    if scenario.optimizer.name not in ("kpaths", "lexi"):
        raise ScenarioInvalid([("optimizer.name", f"{scenario.optimizer.name} cannot drive a simulation")])
    return SimSetup(tx, rx, Trajectory(tuple(map(tuple, tr.waypoints_m)), tr.speed_mps, tr.start_time_s),
                    BroadcastChannel(b.rate_bps, b.command_size_bits, b.tile_capacity, b.deploy_latency_s),
                    channel_params(scenario), s.time_step_s, s.duration_s, scenario.optimizer.name,
                    scenario.optimizer.k, scenario.optimizer.paths_per_pair, s.perpendicular_tolerance,
                    s.idle_function, s.seed if seed is None else seed)
