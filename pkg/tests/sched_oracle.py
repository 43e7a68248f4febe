"""Brute-force references for the update scheduler (test-only)."""

from itertools import product

import networkx as nx
import numpy as np

from pwe.scheduler import Topology, build_model, interleaving_violations
from pwe.scheduler.consistency import route_violations


def random_instance(seed, max_tiles=8, rounds=2):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, max_tiles + 1))
    tiles = [f"t{i}" for i in range(n)]
    edges = set()
    # a spanning path keeps most instances feasible
    order = [str(x) for x in rng.permutation(tiles)]
    for a, b in zip(order, order[1:]):
        edges.add((a, b))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.2:
                edges.add((tiles[i], tiles[j]))
    users = ["s1", "d1", "s2", "d2"]
    for u in users:
        for t in map(str, rng.choice(tiles, size=int(rng.integers(1, 3)), replace=False)):
            edges.add((u, str(t)))
    topo = Topology.from_edges(tiles + users, edges, users)
    pairs = [[("s1", "d1")]]
    for _ in range(rounds - 1):
        pairs.append([("s1", "d1"), ("s2", "d2")] if rng.random() < 0.5 else [("s2", "d2")])
    return topo, pairs


def simple_paths(topo, s, d):
    g = nx.Graph()
    g.add_nodes_from(topo.nodes)
    g.add_edges_from(topo.edges)
    keep = [n for n in topo.nodes if n not in topo.fixed or n in (s, d)]
    return [list(p) for p in nx.all_simple_paths(g.subgraph(keep), s, d)]


def brute_touches(model):
    """Minimum touches over every route combination, checked with explicit cycle search and interleavings."""
    topo = model.topology
    tasks = [(t, p) for t in range(model.rounds) for p in model.pairs_per_round[t]]
    options = [simple_paths(topo, *p) for _, p in tasks]
    init = model.initial_activity
    best = None
    prev0 = {tuple(k): v for k, v in model.initial_routes.items()}
    for combo in product(*options):
        routes = [dict() for _ in range(model.rounds)]
        for (t, p), r in zip(tasks, combo):
            routes[t][p] = r
        ok = True
        prev_arcs = {(a, b) for r in prev0.values() for a, b in zip(r, r[1:])}
        prev = prev0
        for t in range(model.rounds):
            arcs = {(a, b) for r in routes[t].values() for a, b in zip(r, r[1:])}
            g = nx.DiGraph(list(arcs | prev_arcs))
            if not nx.is_directed_acyclic_graph(g):
                ok = False
                break
            if route_violations(routes[t], model.pairs_per_round[t]):
                ok = False
                break
            if interleaving_violations(prev, routes[t], model.pairs_per_round[t]):
                ok = False
                break
            prev, prev_arcs = routes[t], arcs
        if not ok:
            continue
        used = [{n for r in routes[t].values() for n in r} for t in range(model.rounds)]
        cost = 0
        for u in topo.tiles:
            best_u = None
            for seq in product((0, 1), repeat=model.rounds):
                if any(u in used[t] and not seq[t] for t in range(model.rounds)):
                    continue
                flips = sum(a != b for a, b in zip((init[u],) + seq, seq))
                best_u = flips if best_u is None else min(best_u, flips)
            cost += best_u
        best = cost if best is None else min(best, cost)
    return best
