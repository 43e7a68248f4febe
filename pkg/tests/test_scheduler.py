import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from pwe.errors import LimitExceeded, RoundsNonPositive, UnknownEndpoint
from pwe.scheduler import (Limits, Topology, build_model, interleaving_violations, linprog, relax_and_round,
                           solve_exact, solve_relaxation, to_lp, transition_verdict, validate_consistency)
from pwe.scheduler.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED
from pwe.scheduler.solution import min_changes

from sched_oracle import brute_touches, random_instance


def line_topology():
    # s - t0 - t1 - d, plus a detour s - t2 - t3 - d
    edges = [("s", "t0"), ("t0", "t1"), ("t1", "d"), ("s", "t2"), ("t2", "t3"), ("t3", "d")]
    return Topology.from_edges(["s", "d", "t0", "t1", "t2", "t3"], edges, ["s", "d"])


def test_single_round_uses_shortest_route():
    m = build_model(line_topology(), [[("s", "d")]], 1)
    sched = solve_exact(m)
    assert sched.touches == 2
    assert sched.consistent


def test_keeping_live_route_costs_nothing():
    m = build_model(line_topology(), [[("s", "d")]], 1, initial_routes={("s", "d"): ["s", "t2", "t3", "d"]})
    assert solve_exact(m).touches == 0


def test_model_errors():
    with pytest.raises(RoundsNonPositive):
        build_model(line_topology(), [], 0)
    with pytest.raises(UnknownEndpoint):
        build_model(line_topology(), [[("s", "nowhere")]], 1)
    topo, pairs = random_instance(3)
    with pytest.raises(LimitExceeded):
        solve_exact(build_model(topo, pairs, len(pairs)), Limits(max_tiles=2))


@pytest.mark.parametrize("seed", range(6))
def test_exact_matches_brute_force(seed):
    topo, pairs = random_instance(seed, max_tiles=6)
    m = build_model(topo, pairs, len(pairs))
    best = brute_touches(m)
    if best is None:
        pytest.skip("infeasible instance")
    sched = solve_exact(m)
    assert sched.touches == best
    ok, viol = validate_consistency(topo, sched, pairs)
    assert ok, viol
    lp, _ = solve_relaxation(m)
    assert lp <= best + 1e-7


def test_relax_and_round_is_consistent():
    topo, pairs = random_instance(1, max_tiles=6)
    m = build_model(topo, pairs, len(pairs))
    sched = relax_and_round(m, seed=0, attempts=50)
    assert validate_consistency(topo, sched, pairs)[0]
    assert sched.touches >= solve_exact(m).touches


def test_to_lp_sections():
    m = build_model(line_topology(), [[("s", "d")]], 1)
    text = to_lp(m)
    for head in ("Minimize", "Subject To", "Bounds", "General", "End"):
        assert f"\n{head}\n" in "\n" + text
    assert text.count("mtz_") >= len(m.topology.arcs)


@pytest.mark.parametrize("forced,a0,want", [
    ([1, 0, 1], 0, 1),
    ([0, 0, 0], 1, 0),
    ([1, 1, 1], 1, 0),
    ([0, 1, 0, 1], 0, 1),
])
def test_min_changes(forced, a0, want):
    cost, states = min_changes(forced, a0)
    assert cost == want
    assert all(s for s, f in zip(states, forced) if f)
    assert sum(a != b for a, b in zip([a0] + states, states)) == cost


# ---------------------------------------------------------------- simplex against scipy

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_simplex_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n, mu, me = int(rng.integers(2, 6)), int(rng.integers(1, 5)), int(rng.integers(0, 3))
    c = rng.normal(size=n)
    A_ub, b_ub = rng.normal(size=(mu, n)), rng.uniform(0, 3, size=mu)
    A_eq = rng.normal(size=(me, n)) if me else None
    b_eq = A_eq @ rng.uniform(0, 1, size=n) if me else None
    bounds = [(0, float(rng.uniform(0.5, 2)))] * n
    ours = linprog(c, A_ub, b_ub, A_eq, b_eq, bounds)
    ref = scipy.optimize.linprog(c, A_ub, b_ub, A_eq, b_eq, bounds, method="highs")
    if ref.status == 0:
        assert ours.status == OPTIMAL
        assert ours.fun == pytest.approx(ref.fun, abs=1e-7)
    elif ref.status == 2:
        assert ours.status == INFEASIBLE


def test_simplex_unbounded():
    assert linprog([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0]).status == UNBOUNDED


def test_relaxation_matches_scipy():
    topo, pairs = random_instance(2, max_tiles=5)
    m = build_model(topo, pairs, len(pairs))
    c, A_ub, b_ub, A_eq, b_eq, bounds, _ = m.matrices()
    ref = scipy.optimize.linprog(c, A_ub, b_ub, A_eq, b_eq, bounds, method="highs")
    assert solve_relaxation(m)[0] == pytest.approx(ref.fun, abs=1e-7)


# ---------------------------------------------------------------- certificate against interleavings

def random_route(rng, tiles, s, d):
    k = int(rng.integers(1, len(tiles) + 1))
    return [s, *map(str, rng.choice(tiles, size=k, replace=False)), d]


@pytest.mark.parametrize("seed", range(40))
def test_transition_verdict_matches_interleavings(seed):
    rng = np.random.default_rng(seed)
    tiles = ["t0", "t1", "t2", "t3"]
    pairs = [("s", "d")]
    old = {("s", "d"): random_route(rng, tiles, "s", "d")}
    new = {("s", "d"): random_route(rng, tiles, "s", "d")}
    assert sorted(transition_verdict(old, new, pairs)) == interleaving_violations(old, new, pairs)


def test_swapped_order_loops():
    old = {("s", "d"): ["s", "t0", "t1", "d"]}
    new = {("s", "d"): ["s", "t1", "t0", "d"]}
    kinds = {k for _, k in transition_verdict(old, new, [("s", "d")])}
    assert "loop" in kinds


def test_every_subset_of_two_pair_update():
    old = {("s", "d"): ["s", "t0", "d"], ("s2", "d2"): ["s2", "t1", "d2"]}
    new = {("s", "d"): ["s", "t1", "d"], ("s2", "d2"): ["s2", "t0", "d2"]}
    pairs = list(old)
    assert sorted(transition_verdict(old, new, pairs)) == interleaving_violations(old, new, pairs)
    # a source may switch before its new next hop holds a rule for the pair
    assert {k for _, k in interleaving_violations(old, new, pairs)} == {"black_hole"}
