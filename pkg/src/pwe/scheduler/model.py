"""Consistent-update MILP over a tile topology.

Node activity ``a[u,t]``, change indicators ``ch[u,t]``, link activity
``la[u,v,t]`` per directed arc, per-pair arc use ``pa[u,v,t,k]``, orders
``o[u,t]``, distances ``dis[u,v,t]`` with their auxiliary binaries
``x[u,v,w,t]`` and the integer objective ``touches``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from ..errors import RoundsNonPositive, UnknownEndpoint

LE, GE, EQ = "<=", ">=", "="


@dataclass(frozen=True)
class Topology:
    """Undirected node graph; ``fixed`` nodes (users) are always active and never counted."""

    nodes: tuple
    edges: tuple
    fixed: frozenset = frozenset()

    @classmethod
    def from_edges(cls, nodes, edges, fixed=()):
        nodes = tuple(sorted(nodes))
        es = sorted({tuple(sorted(e)) for e in edges})
        return cls(nodes, tuple(es), frozenset(fixed))

    @classmethod
    def from_graph(cls, graph, endpoints=()):
        users = set(endpoints)
        nodes = set(graph.tiles) | users
        edges = [(lk.a, lk.b) for lk in graph.links.values() if lk.a in nodes and lk.b in nodes]
        return cls.from_edges(nodes, edges, users)

    @property
    def tiles(self) -> tuple:
        return tuple(n for n in self.nodes if n not in self.fixed)

    @property
    def arcs(self) -> tuple:
        return tuple(sorted([(a, b) for a, b in self.edges] + [(b, a) for a, b in self.edges]))

    def neighbors(self) -> dict:
        nb = {n: set() for n in self.nodes}
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        return {n: sorted(v) for n, v in nb.items()}

    def hop_distances(self, big: int) -> dict:
        nb = self.neighbors()
        dist = {}
        for s in self.nodes:
            d = {s: 0}
            frontier = [s]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in nb[u]:
                        if v not in d:
                            d[v] = d[u] + 1
                            nxt.append(v)
                frontier = nxt
            for v in self.nodes:
                dist[s, v] = d.get(v, big)
        return dist


@dataclass(frozen=True)
class Var:
    name: tuple
    lb: float
    ub: float
    integer: bool


@dataclass(frozen=True)
class Row:
    family: str
    coefs: tuple   # ((var_index, coef), ...)
    sense: str
    rhs: float


@dataclass
class MilpModel:
    topology: Topology
    pairs_per_round: list
    rounds: int
    big_m: int
    initial_routes: dict
    transition_mtz: bool
    variables: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    objective: dict = field(default_factory=dict)

    def add_var(self, name, lb, ub, integer=True) -> int:
        self.index[name] = len(self.variables)
        self.variables.append(Var(name, float(lb), float(ub), integer))
        return self.index[name]

    def add_row(self, family, coefs, sense, rhs):
        merged: dict = {}
        const = 0.0
        for key, c in coefs:
            if isinstance(key, tuple):
                merged[self.index[key]] = merged.get(self.index[key], 0.0) + c
            else:
                const += c * key
        self.rows.append(Row(family, tuple(sorted(merged.items())), sense, float(rhs - const)))

    def v(self, *name) -> int:
        return self.index[name]

    def family_counts(self) -> Counter:
        return Counter(r.family for r in self.rows)

    def variable_counts(self) -> Counter:
        return Counter(v.name[0] for v in self.variables)

    @property
    def initial_activity(self) -> dict:
        used = {n for route in self.initial_routes.values() for n in route}
        return {u: int(u in used) for u in self.topology.tiles}

    @property
    def initial_arcs(self) -> set:
        return {(a, b) for route in self.initial_routes.values() for a, b in zip(route, route[1:])}

    def violations(self, x, tol: float = 1e-6) -> list:
        """Rows and bounds that ``x`` breaks, as ``(family, lhs, sense, rhs)``."""
        x = np.asarray(x, dtype=float)
        bad = []
        for v, val in zip(self.variables, x):
            if val < v.lb - tol or val > v.ub + tol or (v.integer and abs(val - round(val)) > tol):
                bad.append(("bounds", val, v.name, (v.lb, v.ub)))
        ri, ci, cv = self._sparse()
        lhs = np.zeros(len(self.rows))
        np.add.at(lhs, ri, cv * x[ci])
        for r, val in zip(self.rows, lhs):
            if (r.sense == LE and val > r.rhs + tol) or (r.sense == GE and val < r.rhs - tol) or (
                    r.sense == EQ and abs(val - r.rhs) > tol):
                bad.append((r.family, float(val), r.sense, r.rhs))
        return bad

    def _sparse(self):
        cache = getattr(self, "_coo", None)
        if cache is None or cache[0] != len(self.rows):
            ri = [k for k, r in enumerate(self.rows) for _ in r.coefs]
            ci = [i for r in self.rows for i, _ in r.coefs]
            cv = [c for r in self.rows for _, c in r.coefs]
            cache = (len(self.rows), np.array(ri, dtype=int), np.array(ci, dtype=int), np.array(cv))
            self._coo = cache
        return cache[1:]

    def matrices(self, drop=("dis", "x")):
        """Dense LP data ``(c, A_ub, b_ub, A_eq, b_eq, bounds, names)`` without the dropped families."""
        keep = [i for i, v in enumerate(self.variables) if v.name[0] not in drop]
        pos = {i: k for k, i in enumerate(keep)}
        n = len(keep)
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for r in self.rows:
            if any(i not in pos for i, _ in r.coefs):
                continue
            row = np.zeros(n)
            for i, c in r.coefs:
                row[pos[i]] = c
            if r.sense == LE:
                ub_rows.append(row), ub_rhs.append(r.rhs)
            elif r.sense == GE:
                ub_rows.append(-row), ub_rhs.append(-r.rhs)
            else:
                eq_rows.append(row), eq_rhs.append(r.rhs)
        c = np.zeros(n)
        for i, w in self.objective.items():
            c[pos[i]] = w
        bounds = [(self.variables[i].lb, self.variables[i].ub) for i in keep]
        return (c, np.array(ub_rows).reshape(-1, n), np.array(ub_rhs), np.array(eq_rows).reshape(-1, n),
                np.array(eq_rhs), bounds, [self.variables[i].name for i in keep])


def build_model(topology, pairs_per_round, rounds: int, initial_routes: dict | None = None,
                transition_mtz: bool = True, big_m: int | None = None) -> MilpModel:
    """Assemble the consistent-update program.

    ``pairs_per_round[t-1]`` lists the ``(s, d)`` pairs served in round ``t``;
    ``initial_routes`` maps pairs to the node routes live before round 1.
    MTZ rows use the strict form ``la + (o_u - o_v + 1)/|V| <= 1``; with
    ``transition_mtz`` the orders of round ``t`` must also respect the arcs
    of round ``t-1`` so their union stays acyclic.
    """
    if rounds < 1:
        raise RoundsNonPositive(f"rounds must be >= 1, got {rounds}")
    if not isinstance(topology, Topology):
        endpoints = {n for prs in pairs_per_round for p in prs for n in p}
        topology = Topology.from_graph(topology, endpoints & set(topology.users))
    pairs_per_round = [list(map(tuple, prs)) for prs in pairs_per_round]
    if len(pairs_per_round) != rounds:
        raise ValueError(f"need pairs for {rounds} rounds, got {len(pairs_per_round)}")
    nodes = set(topology.nodes)
    for prs in pairs_per_round:
        for s, d in prs:
            for e in (s, d):
                if e not in nodes:
                    raise UnknownEndpoint(e)
            if s == d:
                raise UnknownEndpoint(f"pair {s}->{d} has identical endpoints")
    initial_routes = {tuple(k): list(v) for k, v in (initial_routes or {}).items()}
    V = topology.nodes
    nV = len(V)
    tiles = topology.tiles
    arcs = topology.arcs
    M = big_m if big_m is not None else nV + 1
    if M <= len(tiles):
        raise ValueError("big-M must exceed the number of tiles")
    m = MilpModel(topology, pairs_per_round, rounds, M, initial_routes, transition_mtz)
    init = m.initial_activity
    init_arcs = m.initial_arcs

    for t in range(1, rounds + 1):
        for u in V:
            fixed = u in topology.fixed
            m.add_var(("a", u, t), 1 if fixed else 0, 1)
        for u in tiles:
            m.add_var(("ch", u, t), 0, 1)
        for a, b in arcs:
            m.add_var(("la", a, b, t), 0, 1)
        for k, (s, d) in enumerate(pairs_per_round[t - 1]):
            for a, b in arcs:
                # users other than the pair's endpoints absorb: no transit through them
                blocked = (a in topology.fixed and a != s) or (b in topology.fixed and b != d)
                m.add_var(("pa", a, b, t, k), 0, 0 if blocked else 1)
        for u in V:
            m.add_var(("o", u, t), 0, nV - 1)
        for u, v in permutations(V, 2):
            m.add_var(("dis", u, v, t), 0, M)
        for u, v, w in permutations(V, 3):
            m.add_var(("x", u, v, w, t), 0, 1)
    m.add_var(("touches",), 0, len(tiles) * rounds)
    m.objective = {m.v("touches"): 1.0}

    m.add_row("touch_cap", [(("ch", u, t), 1.0) for t in range(1, rounds + 1) for u in tiles]
              + [(("touches",), -1.0)], LE, 0)
    for t in range(1, rounds + 1):
        for u in tiles:
            prev = ("a", u, t - 1) if t > 1 else init[u]
            m.add_row("change", [(("ch", u, t), 1.0), (("a", u, t), -1.0), (prev, 1.0)], GE, 0)
            m.add_row("change", [(("ch", u, t), 1.0), (("a", u, t), 1.0), (prev, -1.0)], GE, 0)
        for a, b in arcs:
            la = ("la", a, b, t)
            m.add_row("link_node", [(la, 1.0), (("a", a, t), -1.0)], LE, 0)
            m.add_row("link_node", [(la, 1.0), (("a", b, t), -1.0)], LE, 0)
            m.add_row("link_dis", [(la, 1.0), (("dis", a, b, t), -1.0)], LE, 0)
            for k in range(len(pairs_per_round[t - 1])):
                m.add_row("pair_link", [(("pa", a, b, t, k), 1.0), (la, -1.0)], LE, 0)
        for u, v, w in permutations(V, 3):
            m.add_row("triangle_le", [(("dis", u, v, t), 1.0), (("dis", u, w, t), -1.0), (("dis", w, v, t), -1.0)],
                      LE, 0)
            m.add_row("triangle_ge", [(("dis", u, v, t), 1.0), (("dis", u, w, t), -1.0), (("dis", w, v, t), -1.0),
                                      (("x", u, v, w, t), -M)], GE, -M)
        out_arcs = {n: [(a, b) for a, b in arcs if a == n] for n in V}
        in_arcs = {n: [(a, b) for a, b in arcs if b == n] for n in V}
        for k, (s, d) in enumerate(pairs_per_round[t - 1]):
            m.add_row("source", [(("pa", a, b, t, k), 1.0) for a, b in out_arcs[s]], EQ, 1)
            m.add_row("sink", [(("pa", a, b, t, k), 1.0) for a, b in in_arcs[d]], EQ, 1)
            for w in V:
                if w in (s, d):
                    continue
                m.add_row("conservation", [(("pa", a, b, t, k), 1.0) for a, b in in_arcs[w]]
                          + [(("pa", a, b, t, k), -1.0) for a, b in out_arcs[w]], EQ, 0)
        for a, b in arcs:
            m.add_row("mtz", [(("la", a, b, t), float(nV)), (("o", a, t), 1.0), (("o", b, t), -1.0)], LE, nV - 1)
        if transition_mtz:
            for a, b in arcs:
                prev = ("la", a, b, t - 1) if t > 1 else float((a, b) in init_arcs)
                m.add_row("mtz_transition", [(prev, float(nV)), (("o", a, t), 1.0), (("o", b, t), -1.0)], LE, nV - 1)
    return m
