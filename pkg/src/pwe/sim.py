"""Time-stepped mobility simulation with a broadcast control channel."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import em
from .channel import ChannelParams, compute_pdp, doppler_spread, fmt
from .errors import EmptySeries, NoFeasiblePath, ScenarioInvalid, TimeOutOfRange
from .graph import Configuration, PweGraph
from .optimizers import MAX_RX_POWER, UserObjective, k_shortest_configure, lexicographic_greedy

SERIES_COLUMNS = ("time_s", "distance_m", "doppler_spread_hz", "rx_power_dbm", "config_age_s", "mode")
MODES = ("on", "off")


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple
    speed_mps: float
    start_time_s: float = 0.0

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        if len(pts) < 2:
            raise ValueError("a trajectory needs at least 2 waypoints")
        if any(len(p) != 3 for p in pts):
            raise ValueError("waypoints must be 3D points")
        if not self.speed_mps > 0:
            raise ValueError(f"speed_mps must be positive, got {self.speed_mps}")

    @property
    def _legs(self) -> np.ndarray:
        p = np.array(self.waypoints)
        return np.linalg.norm(np.diff(p, axis=0), axis=1)

    @property
    def length_m(self) -> float:
        return float(self._legs.sum())

    @property
    def duration_s(self) -> float:
        return self.length_m / self.speed_mps

    @property
    def end_time_s(self) -> float:
        return self.start_time_s + self.duration_s

    def distance_at(self, t: float) -> float:
        if t < self.start_time_s - 1e-12:
            raise TimeOutOfRange(f"t={t} precedes start {self.start_time_s}")
        # a zero-length hold is valid at every later time
        if self.length_m > 0 and t > self.end_time_s + 1e-9:
            raise TimeOutOfRange(f"t={t} is past the end of the trajectory ({self.end_time_s})")
        return min(self.length_m, max(0.0, (t - self.start_time_s) * self.speed_mps))

    def _locate(self, s: float) -> tuple[int, float]:
        legs = self._legs
        acc = 0.0
        for i, L in enumerate(legs):
            if s <= acc + L + 1e-12 and L > 0:
                return i, (s - acc) / L
            acc += L
        last = max((i for i, L in enumerate(legs) if L > 0), default=len(legs) - 1)
        return last, 1.0

    def position_at_distance(self, s: float) -> np.ndarray:
        p = np.array(self.waypoints)
        i, f = self._locate(s)
        return p[i] + f * (p[i + 1] - p[i])

    def velocity(self, t: float) -> np.ndarray:
        """Velocity vector at ``t``; at a waypoint the outgoing leg wins."""
        s = self.distance_at(t)
        if self.length_m == 0:
            return np.zeros(3)
        p = np.array(self.waypoints)
        legs = self._legs
        acc = 0.0
        i = len(legs) - 1
        for k, L in enumerate(legs):
            if L > 0 and s < acc + L - 1e-9:
                i = k
                break
            acc += L
        while legs[i] == 0 and i > 0:
            i -= 1
        d = p[i + 1] - p[i]
        return self.speed_mps * d / np.linalg.norm(d)


def predict_position(trajectory: Trajectory, t: float) -> np.ndarray:
    return trajectory.position_at_distance(trajectory.distance_at(t))


@dataclass(frozen=True)
class BroadcastChannel:
    """Control channel that streams one full schedule per refresh period."""

    rate_bps: float = 360e3
    command_size_bits: int = 360
    tile_capacity: int = 1000
    deploy_latency_s: float | None = None

    def __post_init__(self):
        if not self.rate_bps > 0:
            raise ValueError("rate_bps must be positive")
        if self.command_size_bits < 1 or self.tile_capacity < 1:
            raise ValueError("command_size_bits and tile_capacity must be >= 1")

    @property
    def schedule_size_bits(self) -> int:
        return self.command_size_bits * self.tile_capacity

    @property
    def refresh_period_s(self) -> float:
        return self.schedule_size_bits / self.rate_bps

    @property
    def latency_s(self) -> float:
        return self.refresh_period_s if self.deploy_latency_s is None else self.deploy_latency_s


@dataclass(frozen=True)
class Sample:
    time_s: float
    distance_m: float
    doppler_spread_hz: float
    rx_power_dbm: float
    config_age_s: float


@dataclass
class TimeSeries:
    mode: str
    samples: list = field(default_factory=list)
    deploys: list = field(default_factory=list)   # deploy instants in seconds

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    def rows(self) -> list:
        return [(fmt(s.time_s), fmt(s.distance_m), fmt(s.doppler_spread_hz), fmt(s.rx_power_dbm),
                 fmt(s.config_age_s), self.mode) for s in self.samples]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        w.writerows(self.rows())
        return buf.getvalue()


def configuration_age_profile(series: TimeSeries) -> list:
    if not series.samples:
        raise EmptySeries("configuration age of an empty series")
    return [(s.distance_m, s.config_age_s) for s in series.samples]


def age_from_deploys(times, deploys) -> list:
    """Replay a deploy log: age at each time is the gap since the latest deploy not after it."""
    deploys = sorted(deploys)
    out = []
    for t in times:
        past = [d for d in deploys if d <= t + 1e-12]
        if not past:
            raise ValueError(f"no deploy at or before t={t}")
        out.append(t - past[-1])
    return out


@dataclass(frozen=True)
class SimSetup:
    """Everything a run needs besides the graph."""

    tx_id: str
    rx_id: str
    trajectory: Trajectory
    broadcast: BroadcastChannel = BroadcastChannel()
    channel: ChannelParams = ChannelParams()
    time_step_s: float = 0.05
    duration_s: float | None = None
    optimizer: str = "kpaths"
    k: int = 1
    paths_per_pair: int = 1
    perpendicular_tolerance: float = 0.1
    idle_function: str = em.ABSORB
    seed: int = 0

    def __post_init__(self):
        if not self.time_step_s > 0:
            raise ValueError("time_step_s must be positive")
        if self.optimizer not in ("kpaths", "lexi"):
            raise ValueError(f"optimizer {self.optimizer!r} cannot drive a mobility run")

    @property
    def end_time_s(self) -> float:
        if self.duration_s is not None:
            return self.trajectory.start_time_s + self.duration_s
        return self.trajectory.end_time_s


def sample_times(setup: SimSetup) -> list:
    t0 = setup.trajectory.start_time_s
    n = int(math.floor((setup.end_time_s - t0) / setup.time_step_s + 1e-9))
    return [t0 + i * setup.time_step_s for i in range(n + 1)]


def idle_fill(graph: PweGraph, config: Configuration, function_id: str) -> Configuration:
    """Give every unassigned coated tile ``function_id`` (virtual tiles stay specular)."""
    updates = {}
    for tid, tile in graph.tiles.items():
        if config.get(tid) is None and tile.placement.coated:
            updates[tid] = em.merge([graph.function(tid, function_id)])
    return config.with_assignment(updates)


def plan_configuration(graph: PweGraph, setup: SimSetup, position, velocity) -> Configuration:
    """Configuration for the receiver standing at ``position`` while moving with ``velocity``."""
    g = graph.with_user_at(setup.rx_id, position)
    if setup.optimizer == "kpaths":
        moving = np.linalg.norm(velocity) > 0
        obj = UserObjective(setup.tx_id, setup.rx_id, (MAX_RX_POWER,),
                            trajectory=tuple(velocity) if moving else None, perpendicular=bool(moving),
                            perpendicular_tolerance=setup.perpendicular_tolerance)
        config = k_shortest_configure(g, [obj], setup.k, setup.channel, fallback_min_cos=True,
                                      paths_per_pair=setup.paths_per_pair).configuration
    else:
        config = lexicographic_greedy(g, [(setup.tx_id, setup.rx_id)], setup.channel).configuration
    if setup.idle_function is not None:
        config = idle_fill(g, config, setup.idle_function)
    return config


def run_mode(graph: PweGraph, setup: SimSetup, mode: str) -> TimeSeries:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    traj = setup.trajectory
    period = setup.broadcast.refresh_period_s
    f = setup.channel.frequency_hz
    series = TimeSeries(mode)
    config = Configuration()
    deployed_at = traj.start_time_s
    next_deploy = traj.start_time_s
    for t in sample_times(setup):
        if mode == "on" and t >= next_deploy - 1e-9:
            # the schedule broadcast during the previous period targets this instant
            try:
                config = plan_configuration(graph, setup, predict_position(traj, next_deploy),
                                            traj.velocity(next_deploy))
            except NoFeasiblePath:
                config = idle_fill(graph, Configuration(), setup.idle_function) if setup.idle_function else \
                    Configuration()
            deployed_at = next_deploy
            series.deploys.append(deployed_at)
            next_deploy = traj.start_time_s + len(series.deploys) * period
        pos = predict_position(traj, t)
        vel = traj.velocity(t)
        g = graph.with_user_at(setup.rx_id, pos)
        pdp = compute_pdp(g, config if mode == "on" else None, setup.tx_id, setup.rx_id, setup.channel)
        if len(pdp):
            spread = doppler_spread(pdp, vel, f)
            power = max(pdp.total_power_dbm, setup.channel.min_power_dbm)
        else:
            spread, power = 0.0, setup.channel.min_power_dbm
        age = t - deployed_at if mode == "on" else t - traj.start_time_s
        series.samples.append(Sample(t, traj.distance_at(t), spread, power, age))
    if mode == "off":
        series.deploys.append(traj.start_time_s)
    return series


def run_scenario(graph: PweGraph, setup: SimSetup, modes=MODES) -> dict:
    """One :class:`TimeSeries` per requested mode, keyed ``"on"``/``"off"``."""
    for uid in (setup.tx_id, setup.rx_id):
        if uid not in graph.users:
            raise ScenarioInvalid([("users", f"unknown user {uid!r}")])
    return {m: run_mode(graph, setup, m) for m in modes}


def sawtooth_period(series: TimeSeries, column: str = "config_age_s") -> float:
    """Mean traveled distance between resets of ``column`` (drops to near zero)."""
    vals = series.column(column)
    dist = series.column("distance_m")
    resets = [dist[i] for i in range(1, len(vals)) if vals[i] < vals[i - 1] - 1e-12]
    if len(resets) < 2:
        raise EmptySeries("fewer than two resets in the series")
    return float(np.mean(np.diff(resets)))
