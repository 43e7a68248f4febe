"""Weighted digraph views of a PWE graph and the path searches the heuristics share."""

from __future__ import annotations

import heapq
import math
from itertools import count

import numpy as np

from .. import em
from ..channel import ChannelParams
from ..graph import PweGraph

SCALE = 1_000_000  # link costs are kept as integer micro-dB so ties compare exactly


def hop_loss_db(graph: PweGraph, a: str, b: str, params: ChannelParams) -> float:
    """Free-space loss of one hop in dB, nLOS penalty and user antenna loss included."""
    lk = graph.link(a, b)
    db = 10 * math.log10(params.k_factor * lk.length ** params.a_far) - 10 * math.log10(lk.nlos_factor)
    for user, other in ((a, b), (b, a)):
        if user in graph.users:
            g = graph.users[user].antenna.gain(graph.position(other) - graph.position(user))
            db -= 10 * math.log10(g)
    return db


def cost_digraph(graph: PweGraph, tx: str, rx: str, params: ChannelParams, banned_links=frozenset(),
                 banned_tiles=frozenset(), final_filter=None) -> dict:
    """Directed adjacency ``node -> {next: cost}`` for routing tx -> tiles -> rx.

    Other users are left out, tx only emits and rx only absorbs. Tiles that
    cannot steer (virtual or bare) are left out as well.
    """
    adj: dict = {tx: {}}
    tiles = [t for t in graph.tiles if t not in banned_tiles and em.STEER in graph.tiles[t].templates]
    tile_set = set(tiles)
    for t in sorted(tiles):
        out = {}
        for nb, lid in graph.adjacency[t].items():
            if lid in banned_links:
                continue
            if nb in tile_set:
                out[nb] = round(hop_loss_db(graph, t, nb, params) * SCALE)
            elif nb == rx and (final_filter is None or final_filter(t)):
                out[nb] = round(hop_loss_db(graph, t, nb, params) * SCALE)
        adj[t] = out
    for nb, lid in graph.adjacency[tx].items():
        if nb in tile_set and lid not in banned_links:
            adj[tx][nb] = round(hop_loss_db(graph, tx, nb, params) * SCALE)
    adj[rx] = {}
    return adj


def dijkstra(adj: dict, src: str, dst: str, banned_nodes=frozenset(), banned_edges=frozenset(),
             tiebreak=None):
    """Least-cost path as ``(cost, nodes)`` or ``None``.

    ``tiebreak(node)`` adds a secondary integer label summed along the path;
    equal costs then prefer the smaller secondary total, then the
    lexicographically smaller node sequence.
    """
    tb = tiebreak or (lambda n: 0)
    best = {src: (0, 0)}
    heap = [(0, 0, (src,))]
    done = set()
    while heap:
        c, s, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == dst:
            return c, list(path)
        for v, w in sorted(adj.get(u, {}).items()):
            if v in banned_nodes or v in done or (u, v) in banned_edges:
                continue
            label = (c + w, s + tb(v))
            if v not in best or label < best[v]:
                best[v] = label
                heapq.heappush(heap, (*label, path + (v,)))
    return None


def path_cost(adj: dict, path) -> int:
    return sum(adj[a][b] for a, b in zip(path, path[1:]))


def yen(adj: dict, src: str, dst: str):
    """Yield loop-free paths ``(cost, nodes)`` in nondecreasing cost order."""
    first = dijkstra(adj, src, dst)
    if first is None:
        return
    found = [first]
    yield first
    candidates: list = []
    seen = {tuple(first[1])}
    tie = count()
    while True:
        prev = found[-1][1]
        for i in range(len(prev) - 1):
            spur = prev[i]
            root = prev[: i + 1]
            banned_edges = {(p[i], p[i + 1]) for _, p in found if len(p) > i + 1 and p[: i + 1] == root}
            banned_nodes = set(root[:-1])
            sub = dijkstra(adj, spur, dst, banned_nodes, banned_edges)
            if sub is None:
                continue
            total = root[:-1] + sub[1]
            key = tuple(total)
            if key in seen:
                continue
            seen.add(key)
            heapq.heappush(candidates, (path_cost(adj, total), key, next(tie)))
        if not candidates:
            return
        c, key, _ = heapq.heappop(candidates)
        found.append((c, list(key)))
        yield c, list(key)


def segment_point_distance(a, b, p) -> float:
    a, b, p = (np.asarray(x, dtype=float) for x in (a, b, p))
    d = b - a
    t = float(np.clip((p - a) @ d / (d @ d), 0.0, 1.0))
    return float(np.linalg.norm(a + t * d - p))
