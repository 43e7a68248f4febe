import warnings

import networkx as nx
import numpy as np
import pytest
from scipy.stats import chisquare

from pwe.channel import ChannelParams, compute_pdp
from pwe.errors import NoFeasiblePath
from pwe.geometry import Box, Floorplan, Surface, tile_surface
from pwe.graph import CodebookSpec, UserNode, build_graph, steer_configuration
from pwe.optimizers import (ExplorerParams, NonConvergence, TrainingParams, UserObjective,
                            backprop_configure, explorer_search, k_shortest_configure, lexicographic_greedy)
from pwe.optimizers.backprop import loss_and_grad, numeric_grad
from pwe.optimizers.routing import SCALE, cost_digraph, dijkstra, yen

CH = ChannelParams(max_bounces=4)


def build(surfaces, users, obstacles=(), side=1.0):
    fp = Floorplan(tuple(surfaces), tuple(obstacles))
    pl = [p for s in surfaces for p in tile_surface(s, side)]
    return build_graph(fp, pl, users, {s.surface_id: CodebookSpec() for s in surfaces})


@pytest.fixture(scope="module")
def cube():
    # six single-tile faces of a 3 m cube, every pair of faces linked
    o, x, y, z = (0, 0, 0), (3, 0, 0), (0, 3, 0), (0, 0, 3)
    faces = [
        Surface("floor", o, x, y, normal=(0, 0, 1)), Surface("roof", z, x, y, normal=(0, 0, -1)),
        Surface("south", o, x, z, normal=(0, 1, 0)), Surface("north", y, x, z, normal=(0, -1, 0)),
        Surface("west", o, y, z, normal=(1, 0, 0)), Surface("east", x, y, z, normal=(-1, 0, 0)),
    ]
    users = [UserNode("tx", (0.6, 0.9, 1.1)), UserNode("rx", (2.3, 2.1, 1.7))]
    return build(faces, users, side=3.0)


def brute_routes(adj, src, dst):
    g = nx.DiGraph([(a, b, {"w": w}) for a, nbrs in adj.items() for b, w in nbrs.items()])
    return sorted((sum(g[a][b]["w"] for a, b in zip(p, p[1:])), p) for p in nx.all_simple_paths(g, src, dst))


def test_cube_has_six_linked_tiles(cube):
    assert len(cube.tiles) == 6
    tiles = sorted(cube.tiles)
    assert all(b in cube.adjacency[a] for a in tiles for b in tiles if a != b)


def test_k2_candidates_match_enumeration(cube):
    res = k_shortest_configure(cube, [UserObjective("tx", "rx")], k=2, params=CH)
    ref = brute_routes(cost_digraph(cube, "tx", "rx", CH), "tx", "rx")[:2]
    got = res.candidates[("tx", "rx")]
    assert [round(c * SCALE) for c, _ in got] == [c for c, _ in ref]
    assert res.selected[("tx", "rx")] in [r for _, r in got]


def test_yen_orders_all_simple_paths(cube):
    adj = cost_digraph(cube, "tx", "rx", CH)
    ref = brute_routes(adj, "tx", "rx")
    got = list(yen(adj, "tx", "rx"))
    assert len(got) == len(ref)
    assert [c for c, _ in got] == [c for c, _ in ref]


@pytest.mark.parametrize("seed", range(20))
def test_dijkstra_matches_networkx(seed):
    rng = np.random.default_rng(seed)
    n = 12
    g = nx.gnp_random_graph(n, 0.3, seed=seed, directed=True)
    adj = {str(u): {} for u in g.nodes}
    for u, v in g.edges:
        adj[str(u)][str(v)] = int(rng.integers(1, 100))
    found = dijkstra(adj, "0", str(n - 1))
    ref = nx.DiGraph([(a, b, {"w": w}) for a, nb in adj.items() for b, w in nb.items()])
    ref.add_nodes_from(adj)
    try:
        want = nx.dijkstra_path_length(ref, "0", str(n - 1), weight="w")
    except nx.NetworkXNoPath:
        assert found is None
        return
    assert found[0] == want


def test_reuse_breaks_ties():
    adj = {"s": {"a": 5, "b": 5}, "a": {"d": 5}, "b": {"d": 5}, "d": {}}
    _, plain = dijkstra(adj, "s", "d")
    _, reuse = dijkstra(adj, "s", "d", tiebreak=lambda n: 0 if n == "b" else 1)
    assert plain == ["s", "a", "d"]
    assert reuse == ["s", "b", "d"]


def test_lexi_routes_every_pair(cube):
    g = cube
    res = lexicographic_greedy(g, [("tx", "rx"), ("rx", "tx")], CH)
    assert set(res.routes) == {("tx", "rx"), ("rx", "tx")}
    for (s, d), r in res.routes.items():
        assert r[0] == s and r[-1] == d


def test_perpendicular_without_candidates_raises(cube):
    obj = UserObjective("tx", "rx", trajectory=(1.0, 0.0, 0.0), perpendicular=True, perpendicular_tolerance=0.0)
    with pytest.raises(NoFeasiblePath):
        k_shortest_configure(cube, [obj], params=CH)
    res = k_shortest_configure(cube, [obj], params=CH, fallback_min_cos=True)
    assert res.selected[("tx", "rx")][-1] == "rx"


# ---------------------------------------------------------------- explorer on the two-route toy

@pytest.fixture(scope="module")
def two_routes():
    # a near mirror and a far one; the far detour is about 10 dB weaker
    near = Surface("near", (1.5, 2.0, 0.5), (1, 0, 0), (0, 0, 1), normal=(0, -1, 0), collimating=False)
    far = Surface("far", (1.5, -8.71, 0.5), (1, 0, 0), (0, 0, 1), normal=(0, 1, 0), collimating=False)
    wall = Box((1.5, -1.0, 0.5), (2.5, 1.0, 1.5))
    return build([near, far], [UserNode("tx", (0.0, 0.0, 1.0)), UserNode("rx", (4.0, 0.0, 1.0))], [wall])


def route_power(graph, route):
    pdp = compute_pdp(graph, steer_configuration(graph, [route]), "tx", "rx", CH)
    return sum(e.power_w for e in pdp if list(e.nodes) == route)


def test_toy_routes_differ_by_ten_db(two_routes):
    adj = cost_digraph(two_routes, "tx", "rx", CH)
    routes = [r for _, r in brute_routes(adj, "tx", "rx")]
    assert len(routes) == 2
    p = sorted(route_power(two_routes, r) for r in routes)
    assert 10 * np.log10(p[1] / p[0]) == pytest.approx(10.0, abs=0.5)


def test_explorer_recovers_best_route(two_routes):
    adj = cost_digraph(two_routes, "tx", "rx", CH)
    best = max((r for _, r in brute_routes(adj, "tx", "rx")), key=lambda r: route_power(two_routes, r))
    res = explorer_search(two_routes, "tx", ["rx"], ExplorerParams(rounds=50, seed=7), CH)
    assert list(res.top["rx"][0].nodes) == best
    assert res.first_arrival_round["rx"] <= 50


def test_explorer_is_uniform_without_reinforcement(cube):
    params = ExplorerParams(rounds=30, spawn_fanout=20, reinforcement=0.0, seed=3, max_hops=1)
    res = explorer_search(cube, "tx", ["rx"], params, CH)
    first = [a[2][1] for a in res.arrivals]
    counts = [first.count(t) for t in sorted(cube.first_contact_tiles("tx"))]
    assert chisquare(counts).pvalue > 0.01


# ---------------------------------------------------------------- backprop

@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    shapes = [(3, 1), (4, 3), (2, 4)]
    w = [rng.uniform(0.1, 1.0, s) for s in shapes]
    target = rng.uniform(0, 1, 2)
    _, grads = loss_and_grad(w, np.ones(1), target)
    for g, n in zip(grads, numeric_grad(w, np.ones(1), target)):
        assert np.allclose(g, n, rtol=1e-5, atol=1e-9)


def test_backprop_reaches_target(cube):
    res = backprop_configure(cube, "tx", ["rx"], ["north"], [0.2], TrainingParams(epochs=500), CH)
    assert res.converged
    assert res.history[-1] <= res.history[0]


def test_backprop_warns_when_stuck(cube):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = backprop_configure(cube, "tx", ["rx"], ["north"], [5.0], TrainingParams(epochs=20), CH)
    assert not res.converged
    assert any(issubclass(w.category, NonConvergence) for w in caught)
