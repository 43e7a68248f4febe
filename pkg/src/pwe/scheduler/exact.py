"""Depth-first branch and bound for the consistent-update program.

Branching fixes per-pair arc variables one hop at a time (flow conservation
propagates the rest of the path), the bound is the cheapest activity plan for
the tiles forced on so far, and MTZ feasibility is checked on the partial
arc unions. Leaves are accepted only if the schedule is transition-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import Infeasible, LimitExceeded
from .model import MilpModel
from .solution import UpdateSchedule, make_schedule, min_changes


@dataclass(frozen=True)
class Limits:
    max_tiles: int = 15
    max_rounds: int = 4
    max_pairs: int = 4
    max_nodes: int = 2_000_000


def check_size(n_tiles: int, rounds: int, n_pairs: int, limits: Limits) -> None:
    if n_tiles > limits.max_tiles or rounds > limits.max_rounds or n_pairs > limits.max_pairs:
        raise LimitExceeded(
            f"instance has {n_tiles} tiles, {rounds} rounds, {n_pairs} pairs per round; "
            f"exact limits are {limits.max_tiles}/{limits.max_rounds}/{limits.max_pairs}"
        )


def check_limits(model: MilpModel, limits: Limits) -> None:
    n_pairs = max((len(p) for p in model.pairs_per_round), default=0)
    check_size(len(model.topology.tiles), model.rounds, n_pairs, limits)


def transit_distances(model: MilpModel) -> dict:
    """Hop distance to each target through tiles only (users cannot relay)."""
    topo = model.topology
    nb = topo.neighbors()
    targets = {d for prs in model.pairs_per_round for _, d in prs}
    out = {}
    for d in targets:
        dist = {d: 0}
        frontier = [d]
        while frontier:
            nxt = []
            for v in frontier:
                for u in nb[v]:
                    if u not in dist and (v == d or v not in topo.fixed):
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        out[d] = dist
    return out


def _reaches(arcsets, src, dst) -> bool:
    stack, seen = [src], {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for arcs in arcsets:
            for v in arcs.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    return False


class _Search:
    def __init__(self, model: MilpModel, limits: Limits):
        self.m = model
        self.limits = limits
        self.topo = model.topology
        self.nb = self.topo.neighbors()
        self.dist = transit_distances(model)
        self.tasks = [(t, p) for t in range(1, model.rounds + 1) for p in model.pairs_per_round[t - 1]]
        self.init = model.initial_activity
        T = model.rounds
        self.forced = {u: [0] * T for u in self.topo.tiles}
        self.tile_cost = {u: min_changes([0] * T, self.init[u])[0] for u in self.topo.tiles}
        # succ[t][u] -> {v: multiplicity}; round 0 holds the initial arcs
        self.succ = [dict() for _ in range(T + 1)]
        for a, b in model.initial_arcs:
            self.succ[0].setdefault(a, {})[b] = 1
        self.routes = [dict() for _ in range(T)]
        self.best = None
        self.best_cost = float("inf")
        self.nodes = 0

    @property
    def bound(self) -> int:
        return sum(self.tile_cost.values())

    def _force(self, u, t) -> int | None:
        if u in self.topo.fixed:
            return None
        prev = self.forced[u][t - 1]
        self.forced[u][t - 1] = prev + 1
        if prev == 0:
            old = self.tile_cost[u]
            self.tile_cost[u] = min_changes([f > 0 for f in self.forced[u]], self.init[u])[0]
            return old
        return -1

    def _unforce(self, u, t, token) -> None:
        if token is None:
            return
        self.forced[u][t - 1] -= 1
        if token >= 0:
            self.tile_cost[u] = token

    def _cycle_if_added(self, t, a, b) -> bool:
        T = self.m.rounds
        views = [[self.succ[t]]]
        if self.m.transition_mtz:
            views.append([self.succ[t], self.succ[t - 1]])
            if t < T:
                views.append([self.succ[t], self.succ[t + 1]])
        return any(_reaches(v, b, a) for v in views)

    def _add_arc(self, t, a, b):
        row = self.succ[t].setdefault(a, {})
        row[b] = row.get(b, 0) + 1

    def _drop_arc(self, t, a, b):
        row = self.succ[t][a]
        row[b] -= 1
        if not row[b]:
            del row[b]

    def run(self):
        self._task(0)
        return self.best

    def _task(self, i):
        if i == len(self.tasks):
            self._leaf()
            return
        t, (s, d) = self.tasks[i]
        token = self._force(s, t)
        if self.bound < self.best_cost:
            self._extend(i, t, s, d, [s])
        self._unforce(s, t, token)

    def _extend(self, i, t, s, d, path):
        self.nodes += 1
        if self.nodes > self.limits.max_nodes:
            raise LimitExceeded(f"search exceeded {self.limits.max_nodes} nodes")
        u = path[-1]
        if u == d:
            self.routes[t - 1][(s, d)] = list(path)
            self._task(i + 1)
            del self.routes[t - 1][(s, d)]
            return
        dist = self.dist[d]
        on_path = set(path)
        cands = [v for v in self.nb[u] if v not in on_path and v in dist
                 and (v == d or v not in self.topo.fixed)]
        cands.sort(key=lambda v: (dist[v], v))
        for v in cands:
            if self._cycle_if_added(t, u, v):
                continue
            token = self._force(v, t)
            if self.bound >= self.best_cost:
                self._unforce(v, t, token)
                continue
            self._add_arc(t, u, v)
            path.append(v)
            self._extend(i, t, s, d, path)
            path.pop()
            self._drop_arc(t, u, v)
            self._unforce(v, t, token)

    def _leaf(self):
        cost = self.bound
        if cost >= self.best_cost:
            return
        routes = [dict(r) for r in self.routes]
        sched = make_schedule(self.m, routes)
        if sched.touches != cost:
            raise AssertionError("activity plan disagrees with the running bound")
        if sched.consistent:
            self.best, self.best_cost = sched, cost


def solve_exact(model: MilpModel, limits: Limits = Limits()) -> UpdateSchedule:
    """Minimum-touch consistent schedule; optimality follows from exhausting the tree."""
    check_limits(model, limits)
    search = _Search(model, limits)
    best = search.run()
    if best is None:
        raise Infeasible("no consistent schedule serves every pair")
    return best
