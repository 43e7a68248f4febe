"""Turning chosen routes into full model assignments and update schedules."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .consistency import validate_consistency
from .model import MilpModel

OFF = "off"


@dataclass
class UpdateSchedule:
    routes: list                  # per round: {pair: [nodes]}
    activity: list                # per round: {tile: 0/1}
    rounds: list                  # per round: ((tile, descriptor), ...) changes
    touches: int
    consistent: bool
    violations: tuple = ()
    initial_routes: dict = field(default_factory=dict)
    lp_bound: float | None = None
    assignment: np.ndarray | None = None


def min_changes(forced: list, a0: int) -> tuple[int, list]:
    """Fewest on/off flips of one tile over rounds; ``forced[t]`` pins the tile on."""
    inf = 10 ** 9
    # cost[s]: fewest flips so far ending in state s
    cost = {s: abs(s - a0) for s in (0, 1)}
    if forced[0]:
        cost[0] = inf
    back = []
    for f in forced[1:]:
        new, choice = {}, {}
        for s in (0, 1):
            if s == 0 and f:
                new[s], choice[s] = inf, 0
                continue
            stay, flip = cost[s], cost[1 - s] + 1
            new[s], choice[s] = (stay, s) if stay <= flip else (flip, 1 - s)
        back.append(choice)
        cost = new
    end = 0 if cost[0] <= cost[1] else 1
    states = [end]
    for choice in reversed(back):
        states.append(choice[states[-1]])
    states.reverse()
    return min(cost.values()), states


def activity_plan(model: MilpModel, routes: list) -> tuple[int, list]:
    T = model.rounds
    init = model.initial_activity
    used = [{n for r in rs.values() for n in r} for rs in routes]
    total, plan = 0, [dict() for _ in range(T)]
    for u in model.topology.tiles:
        c, states = min_changes([u in used[t] for t in range(T)], init[u])
        total += c
        for t in range(T):
            plan[t][u] = states[t]
    return total, plan


def order_levels(nodes, arcs) -> dict | None:
    """Longest-path levels of an arc set, or ``None`` if it has a cycle."""
    succ = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a, b in arcs:
        succ[a].append(b)
        indeg[b] += 1
    level = {n: 0 for n in nodes}
    queue = sorted(n for n in nodes if indeg[n] == 0)
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in succ[u]:
            level[v] = max(level[v], level[u] + 1)
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return level if seen == len(nodes) else None


def round_arcs(routes: dict) -> set:
    return {(a, b) for r in routes.values() for a, b in zip(r, r[1:])}


def acyclic_rounds(model: MilpModel, routes: list) -> bool:
    prev = model.initial_arcs
    for rs in routes:
        arcs = round_arcs(rs)
        both = arcs | prev if model.transition_mtz else arcs
        if order_levels(model.topology.nodes, both) is None:
            return False
        prev = arcs
    return True


def assignment_vector(model: MilpModel, routes: list, plan: list) -> np.ndarray:
    topo = model.topology
    x = np.zeros(len(model.variables))
    idx = model.index
    init = model.initial_activity
    dist = topo.hop_distances(model.big_m)
    prev_arcs = model.initial_arcs
    total = 0
    for t in range(1, model.rounds + 1):
        rs = routes[t - 1]
        arcs = round_arcs(rs)
        for u in topo.nodes:
            x[idx["a", u, t]] = 1 if u in topo.fixed else plan[t - 1][u]
        for u in topo.tiles:
            prev = plan[t - 2][u] if t > 1 else init[u]
            ch = abs(plan[t - 1][u] - prev)
            x[idx["ch", u, t]] = ch
            total += ch
        for a, b in arcs:
            x[idx["la", a, b, t]] = 1
        for k, p in enumerate(model.pairs_per_round[t - 1]):
            r = rs[p]
            for a, b in zip(r, r[1:]):
                x[idx["pa", a, b, t, k]] = 1
        lv = order_levels(topo.nodes, arcs | prev_arcs if model.transition_mtz else arcs)
        for u in topo.nodes:
            x[idx["o", u, t]] = lv[u]
        for u, v in permutations(topo.nodes, 2):
            x[idx["dis", u, v, t]] = dist[u, v]
        for u, v, w in permutations(topo.nodes, 3):
            x[idx["x", u, v, w, t]] = int(dist[u, v] == dist[u, w] + dist[w, v])
        prev_arcs = arcs
    x[idx[("touches",)]] = total
    return x


def descriptors(routes: dict) -> dict:
    fns: dict = {}
    for r in routes.values():
        for prev, node, nxt in zip(r, r[1:], r[2:]):
            fns.setdefault(node, set()).add(f"steer:{prev}>{nxt}")
    return {u: "|".join(sorted(f)) for u, f in fns.items()}


def make_schedule(model: MilpModel, routes: list, lp_bound=None, check_model: bool = True) -> UpdateSchedule:
    """Complete routes into a schedule; consistent schedules also get a verified full assignment."""
    touches, plan = activity_plan(model, routes)
    changes = []
    state = {u: descriptors(model.initial_routes).get(u, OFF) if model.initial_activity[u] else OFF
             for u in model.topology.tiles}
    for t in range(model.rounds):
        desc = descriptors(routes[t])
        delta = []
        for u in model.topology.tiles:
            if plan[t][u]:
                new = desc.get(u, state[u] if state[u] != OFF else "absorb")
            else:
                new = OFF
            if new != state[u]:
                delta.append((u, new))
                state[u] = new
        changes.append(tuple(delta))
    sched = UpdateSchedule(routes, plan, changes, touches, True, (), dict(model.initial_routes), lp_bound)
    ok, violations = validate_consistency(model.topology, sched, model.pairs_per_round)
    sched.consistent = ok
    sched.violations = tuple(violations)
    if ok and acyclic_rounds(model, routes):
        x = assignment_vector(model, routes, plan)
        if check_model:
            bad = model.violations(x)
            if bad:
                raise AssertionError(f"assignment breaks model rows: {bad[:3]}")
        sched.assignment = x
    return sched
