"""Constrained k-shortest-path configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import islice

import numpy as np

from .. import em
from ..channel import ChannelParams
from ..errors import InvalidConfiguration, NoFeasiblePath
from ..graph import Configuration, PweGraph, steer_configuration
from .routing import SCALE, cost_digraph, segment_point_distance, yen


@dataclass
class KPathsResult:
    configuration: Configuration
    candidates: dict = field(default_factory=dict)   # pair -> [(cost_db, nodes)]
    selected: dict = field(default_factory=dict)     # pair -> nodes
    committed: dict = field(default_factory=dict)    # pair -> [nodes, ...]


def perpendicular_filter(graph: PweGraph, rx: str, trajectory, tolerance: float):
    v = np.asarray(trajectory, dtype=float)
    v = v / np.linalg.norm(v)
    rx_pos = graph.position(rx)

    def ok(tile_id):
        d = rx_pos - graph.position(tile_id)
        return abs(float(d @ v) / float(np.linalg.norm(d))) <= tolerance + 1e-12

    return ok


def final_link_cosine(graph: PweGraph, tile_id: str, rx: str, trajectory) -> float:
    v = np.asarray(trajectory, dtype=float)
    d = graph.position(rx) - graph.position(tile_id)
    return abs(float(d @ v) / (np.linalg.norm(d) * np.linalg.norm(v)))


def _banned_links(graph: PweGraph, obj) -> set:
    banned = set(obj.forbidden_links)
    if obj.eavesdropper is not None and obj.eavesdropper_radius_m > 0:
        eve = graph.position(obj.eavesdropper)
        for lid, lk in graph.links.items():
            if obj.eavesdropper in (lk.a, lk.b):
                banned.add(lid)
            elif segment_point_distance(graph.position(lk.a), graph.position(lk.b), eve) < obj.eavesdropper_radius_m:
                banned.add(lid)
    return banned


def merge_penalty_db(graph: PweGraph, config: Configuration, route) -> float:
    """Extra loss a route suffers from sharing tiles with functions already placed."""
    db = 0.0
    for prev, node, nxt in zip(route, route[1:], route[2:]):
        held = config.get(node)
        if held is None:
            continue
        fid = f"steer:{prev}>{nxt}"
        fns = {f.function_id: f for f in held.constituents if f.template in em.ROUTING_TEMPLATES}
        fn = graph.function(node, fid)
        fns[fid] = fn
        merged = em.merge(fns.values())
        eff = merged.per_constituent_efficiency[fid]
        db += -10 * math.log10(max(eff, 1e-30) / fn.efficiency)
    return db


def k_shortest_configure(graph: PweGraph, objectives, k: int = 1, params: ChannelParams = ChannelParams(),
                         fallback_min_cos: bool = False, base: Configuration | None = None,
                         paths_per_pair: int = 1) -> KPathsResult:
    """Route every objective's pair over at most ``k`` least-loss candidates.

    Pairs are handled most distant first. Constraints of each objective
    (function cap, forbidden and eavesdropper-adjacent links, perpendicular
    final link) prune the search graph; the ``k`` candidates are then
    re-scored against the configuration built so far and the cheapest one is
    committed. With ``fallback_min_cos`` a pair whose perpendicular filter
    leaves nothing is routed through the final tile of smallest ``|cos|``.
    ``paths_per_pair > 1`` commits that many of the candidates as parallel
    routes, each re-scored against the routes already placed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= paths_per_pair <= k:
        raise ValueError("paths_per_pair must lie in [1, k]")
    order = sorted(objectives, key=lambda o: (-float(np.linalg.norm(graph.position(o.tx) - graph.position(o.rx))),
                                              o.pair))
    config = base or Configuration()
    result = KPathsResult(config)
    for obj in order:
        if not graph.first_contact_tiles(obj.tx) or not graph.first_contact_tiles(obj.rx):
            raise NoFeasiblePath(obj.pair, "no first-contact tiles")
        banned = _banned_links(graph, obj)
        banned_tiles = set()
        if obj.max_functions_per_tile is not None:
            banned_tiles = {t for t, f in config.assignment.items()
                            if len([c for c in f.constituents if c.template in em.ROUTING_TEMPLATES])
                            >= obj.max_functions_per_tile}
        final = None
        if obj.perpendicular:
            final = perpendicular_filter(graph, obj.rx, obj.trajectory, obj.perpendicular_tolerance)
        adj = cost_digraph(graph, obj.tx, obj.rx, params, banned, banned_tiles, final)
        found = list(islice(yen(adj, obj.tx, obj.rx), k))
        if not found and obj.perpendicular and fallback_min_cos:
            lasts = [t for t in graph.first_contact_tiles(obj.rx) if t not in banned_tiles]
            if lasts:
                best = min(final_link_cosine(graph, t, obj.rx, obj.trajectory) for t in lasts)
                keep = {t for t in lasts if final_link_cosine(graph, t, obj.rx, obj.trajectory) <= best + 1e-9}
                adj = cost_digraph(graph, obj.tx, obj.rx, params, banned, banned_tiles, keep.__contains__)
                found = list(islice(yen(adj, obj.tx, obj.rx), k))
        if not found:
            raise NoFeasiblePath(obj.pair, "constraints exclude every route")
        pool = list(found)
        placed = []
        while pool and len(placed) < paths_per_pair:
            scored = [(c / SCALE + merge_penalty_db(graph, config, r), c, r) for c, r in pool]
            scored.sort(key=lambda s: (round(s[0] * SCALE), s[1], s[2]))
            chosen = scored[0][2]
            pool = [(c, r) for c, r in pool if r != chosen]
            try:
                config = steer_configuration(graph, [chosen], config, obj.max_functions_per_tile)
            except InvalidConfiguration:
                if placed:
                    continue
                raise
            placed.append(chosen)
        result.candidates[obj.pair] = [(c / SCALE, r) for c, r in found]
        result.selected[obj.pair] = placed[0]
        result.committed[obj.pair] = placed
    result.configuration = config
    return result
