"""Per-user objectives, the configuration comparator and round-level bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..channel import ChannelParams, compute_pdp, doppler_spread, rms_delay_spread
from ..errors import EmptyProfile, UnknownMetric
from ..graph import Configuration, PweGraph

MAX_RX_POWER = "max_rx_power"
MIN_RMS_DS = "min_rms_ds"
MIN_DOPPLER_SPREAD = "min_doppler_spread"
MIN_EAVESDROP_EXPOSURE = "min_eavesdrop_exposure"
MIN_DELAY = "min_delay"
METRICS = (MAX_RX_POWER, MIN_RMS_DS, MIN_DOPPLER_SPREAD, MIN_EAVESDROP_EXPOSURE, MIN_DELAY)

# scale that maps each metric to a dimensionless cost (lower is better)
NORMALIZERS = {
    MAX_RX_POWER: lambda v: -v / 100.0,        # dBm
    MIN_RMS_DS: lambda v: v / 1e-7,             # s, 100 ns scale
    MIN_DOPPLER_SPREAD: lambda v: v / 400.0,    # Hz
    MIN_EAVESDROP_EXPOSURE: lambda v: v / 100.0,
    MIN_DELAY: lambda v: v / 1e-7,
}


@dataclass(frozen=True)
class UserObjective:
    tx: str
    rx: str
    metrics: tuple = (MAX_RX_POWER,)
    weights: dict = field(default_factory=dict)
    max_functions_per_tile: int | None = None
    forbidden_links: frozenset = frozenset()
    eavesdropper: str | None = None
    eavesdropper_radius_m: float = 0.0
    trajectory: tuple | None = None
    perpendicular: bool = False
    perpendicular_tolerance: float = 0.1

    def __post_init__(self):
        if not self.metrics:
            raise ValueError("objective needs at least one metric")
        for m in self.metrics:
            if m not in METRICS:
                raise UnknownMetric(m)
            if self.weights.get(m, 1.0) <= 0:
                raise ValueError(f"weight of {m} must be positive")

    @property
    def pair(self) -> tuple:
        return (self.tx, self.rx)

    def weight(self, metric: str) -> float:
        return self.weights.get(metric, 1.0)


@dataclass(frozen=True)
class ObjectiveReport:
    metrics: dict
    touches: int
    free_tiles: int
    violations: tuple = ()
    score: float = 0.0


def comparator(f, g) -> int:
    """1 when two tile assignments are identical (``None`` is deactivated)."""
    if f is None or g is None:
        return int(f is None and g is None)
    return int(f == g)


def touches(tile_ids, prev: Configuration, now: Configuration) -> int:
    ids = list(tile_ids)
    return len(ids) - sum(comparator(prev.get(t), now.get(t)) for t in ids)


def free_tiles(tile_ids, config: Configuration) -> int:
    return sum(comparator(config.get(t), None) for t in tile_ids)


def metric_value(graph: PweGraph, config: Configuration, obj: UserObjective, metric: str,
                 params: ChannelParams) -> float:
    if metric == MIN_EAVESDROP_EXPOSURE:
        if obj.eavesdropper is None:
            raise UnknownMetric(f"{metric} needs an eavesdropper id")
        return compute_pdp(graph, config, obj.tx, obj.eavesdropper, params).total_power_dbm
    pdp = compute_pdp(graph, config, obj.tx, obj.rx, params)
    if metric == MAX_RX_POWER:
        return pdp.total_power_dbm
    if metric == MIN_DELAY:
        return float(pdp.delays.min()) if len(pdp) else math.inf
    try:
        if metric == MIN_RMS_DS:
            return rms_delay_spread(pdp)
        if metric == MIN_DOPPLER_SPREAD:
            if obj.trajectory is None:
                raise UnknownMetric(f"{metric} needs a trajectory velocity")
            return doppler_spread(pdp, obj.trajectory, params.frequency_hz)
    except EmptyProfile:
        return math.inf
    raise UnknownMetric(metric)


def scalarize(values: dict, obj: UserObjective) -> float:
    return sum(obj.weight(m) * NORMALIZERS[m](v) for m, v in values.items())


def evaluate(graph: PweGraph, prev: Configuration, now: Configuration, objectives,
             params: ChannelParams = ChannelParams(), r_max: int | None = None,
             s_min: int | None = None) -> ObjectiveReport:
    """Metrics per user pair, touches and free tiles for one round.

    Soft limits ``r_max`` / ``s_min`` are reported as violations and never raise.
    """
    tiles = sorted(graph.tiles)
    values = {}
    score = 0.0
    for obj in objectives:
        vals = {m: metric_value(graph, now, obj, m, params) for m in obj.metrics}
        values[obj.pair] = vals
        score += scalarize(vals, obj)
    r = touches(tiles, prev, now)
    s = free_tiles(tiles, now)
    violations = []
    if r_max is not None and r > r_max:
        violations.append(f"touches {r} exceed R_max {r_max}")
    if s_min is not None and s < s_min:
        violations.append(f"free tiles {s} below S_min {s_min}")
    return ObjectiveReport(values, r, s, tuple(violations), score)
