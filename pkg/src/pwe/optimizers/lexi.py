"""Greedy routing that prefers tiles already in use on equal-cost ties."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..channel import ChannelParams
from ..errors import NoFeasiblePath
from ..graph import Configuration, PweGraph, steer_configuration
from .routing import SCALE, cost_digraph, dijkstra


@dataclass
class GreedyResult:
    configuration: Configuration
    routes: dict = field(default_factory=dict)
    order: list = field(default_factory=list)


def lexicographic_greedy(graph: PweGraph, pairs, params: ChannelParams = ChannelParams(),
                         prefer_reuse: bool = True) -> GreedyResult:
    """Route pairs shortest first; ties go to the route with fewer fresh tiles.

    ``prefer_reuse=False`` drops the tie-break, which is the baseline the
    reuse rule is compared against.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pairs must be nonempty")
    adjs = {p: cost_digraph(graph, p[0], p[1], params) for p in pairs}
    dist = {}
    for p in pairs:
        found = dijkstra(adjs[p], *p)
        if found is None:
            raise NoFeasiblePath(p)
        dist[p] = found[0]
    order = sorted(pairs, key=lambda p: (dist[p], p))
    reused: set = set()
    routes = {}
    config = Configuration()
    for p in order:
        tb = (lambda n: 0 if n in reused or n not in graph.tiles else 1) if prefer_reuse else None
        cost, route = dijkstra(adjs[p], *p, tiebreak=tb)
        routes[p] = route
        reused.update(n for n in route if n in graph.tiles)
        config = steer_configuration(graph, [route], config)
    return GreedyResult(config, routes, order)


def route_cost_db(adj: dict, route) -> float:
    return sum(adj[a][b] for a, b in zip(route, route[1:])) / SCALE
