"""Transient loop and black-hole checks for round-based updates.

Within a round every node whose forwarding rule for a pair changes may flip
at any moment. The order-based verdict inspects the union of old and new
rules: a reachable cycle means some interleaving loops, and a reachable node
with a missing rule in either version means some interleaving drops the
wave. :func:`interleaving_violations` enumerates the interleavings instead.
"""

from __future__ import annotations

from itertools import chain, combinations

LOOP, BLACK_HOLE, BROKEN = "loop", "black_hole", "broken_route"


def rules(routes: dict) -> dict:
    """``pair -> {node: next node}`` from node routes."""
    return {p: {a: b for a, b in zip(r, r[1:])} for p, r in routes.items()}


def route_violations(routes: dict, pairs, arcs=None) -> list:
    """Final-state check: each pair's route runs from s to d over existing arcs without repeats."""
    out = []
    for p in pairs:
        r = routes.get(p)
        if not r or r[0] != p[0] or r[-1] != p[1] or len(set(r)) != len(r):
            out.append((p, BROKEN))
        elif arcs is not None and any((a, b) not in arcs for a, b in zip(r, r[1:])):
            out.append((p, BROKEN))
    return out


def transition_verdict(old_routes: dict, new_routes: dict, pairs) -> list:
    """Violations of pairs live across the transition, from the union of old and new rules."""
    old, new = rules(old_routes), rules(new_routes)
    out = []
    for p in pairs:
        if p not in old or p not in new:
            continue
        s, d = p
        o, n = old[p], new[p]
        succ = {}
        for u in set(o) | set(n):
            succ[u] = {x for x in (o.get(u), n.get(u)) if x is not None}
        seen, stack, hole = {s}, [s], False
        while stack:
            u = stack.pop()
            if u != d and (o.get(u) is None or n.get(u) is None):
                hole = True
            for v in succ.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        # topological order of the reachable union exists iff no cycle
        indeg = {u: 0 for u in seen}
        for u in seen:
            for v in succ.get(u, ()):
                indeg[v] += 1
        queue = [u for u, k in indeg.items() if k == 0]
        ordered = 0
        while queue:
            u = queue.pop()
            ordered += 1
            for v in succ.get(u, ()):
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        if ordered < len(seen):
            out.append((p, LOOP))
        if hole:
            out.append((p, BLACK_HOLE))
    return out


def interleaving_violations(old_routes: dict, new_routes: dict, pairs) -> list:
    """Same question as :func:`transition_verdict`, answered by trying every update subset."""
    old, new = rules(old_routes), rules(new_routes)
    changed = sorted({u for p in set(old) | set(new) for u in set(old.get(p, {})) | set(new.get(p, {}))
                      if old.get(p, {}).get(u) != new.get(p, {}).get(u)})
    found = set()
    live = [p for p in pairs if p in old and p in new]
    for applied in chain.from_iterable(combinations(changed, k) for k in range(len(changed) + 1)):
        applied = set(applied)
        for p in live:
            s, d = p
            u, visited = s, {s}
            while u != d:
                nxt = (new[p] if u in applied else old[p]).get(u)
                if nxt is None:
                    found.add((p, BLACK_HOLE))
                    break
                if nxt in visited:
                    found.add((p, LOOP))
                    break
                visited.add(nxt)
                u = nxt
    return sorted(found)


def validate_consistency(topology, schedule, pairs_per_round) -> tuple[bool, list]:
    """Check every round of ``schedule`` and the transition into it.

    Returns ``(ok, violations)`` where each violation is
    ``(round, pair, kind)``; nothing is raised.
    """
    arcs = None
    if topology is not None:
        edges = topology.edges if hasattr(topology, "edges") else [(lk.a, lk.b) for lk in topology.links.values()]
        arcs = {(a, b) for a, b in edges} | {(b, a) for a, b in edges}
    violations = []
    prev = {tuple(k): list(v) for k, v in schedule.initial_routes.items()}
    for t, (routes, pairs) in enumerate(zip(schedule.routes, pairs_per_round), start=1):
        pairs = [tuple(p) for p in pairs]
        for p, kind in route_violations(routes, pairs, arcs):
            violations.append((t, p, kind))
        for p, kind in transition_verdict(prev, routes, pairs):
            violations.append((t, p, kind))
        prev = routes
    return not violations, violations
