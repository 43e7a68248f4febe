"""LP relaxation plus randomized rounding of the per-pair arc choices."""

from __future__ import annotations

import numpy as np

from ..errors import NoFeasibleSample, SchedulerError
from .exact import transit_distances
from .model import MilpModel
from .simplex import OPTIMAL, linprog
from .consistency import transition_verdict
from .solution import UpdateSchedule, acyclic_rounds, make_schedule


def solve_relaxation(model: MilpModel):
    """LP optimum with binaries relaxed to [0, 1].

    The distance block (``dis`` and its auxiliaries) is left out: it is
    feasible for any choice of the other variables, so dropping it does not
    move the optimum.
    """
    c, A_ub, b_ub, A_eq, b_eq, bounds, names = model.matrices()
    res = linprog(c, A_ub, b_ub, A_eq, b_eq, bounds)
    if res.status != OPTIMAL:
        raise SchedulerError(f"LP relaxation is {res.status}")
    return res.fun, dict(zip(names, res.x))


def _walk(model, rng, values, t, k, s, d, dist, explore=0.05, max_tries=50):
    topo = model.topology
    nb = topo.neighbors()
    for _ in range(max_tries):
        path, seen, u = [s], {s}, s
        while u != d:
            cands = [v for v in nb[u] if v not in seen and v in dist and (v == d or v not in topo.fixed)]
            if not cands:
                break
            # a little mass off the LP support keeps samples from sticking to cyclic unions
            w = np.array([max(values.get(("pa", u, v, t, k), 0.0), 0.0) for v in cands]) + explore
            v = cands[int(rng.choice(len(cands), p=w / w.sum()))]
            path.append(v)
            seen.add(v)
            u = v
        if u == d:
            return path
    return None


def relax_and_round(model: MilpModel, seed: int = 0, attempts: int = 200) -> UpdateSchedule:
    """Sample routes with arc probabilities from the LP optimum and keep the cheapest valid one.

    Each sampled route set is completed with the cheapest activity plan, then
    checked against every model row, the MTZ order condition and the
    transition consistency check; invalid samples are discarded.
    """
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    bound, values = solve_relaxation(model)
    rng = np.random.default_rng(seed)
    dist = transit_distances(model)
    best = None
    for _ in range(attempts):
        routes = []
        ok = True
        for t in range(1, model.rounds + 1):
            rs = {}
            for k, (s, d) in enumerate(model.pairs_per_round[t - 1]):
                path = _walk(model, rng, values, t, k, s, d, dist[d])
                if path is None:
                    ok = False
                    break
                rs[(s, d)] = path
            if not ok:
                break
            # repair: a pair whose sampled reroute would open a transient gap keeps its old route
            prev = routes[-1] if routes else model.initial_routes
            for p in list(rs):
                if p in prev and transition_verdict({p: prev[p]}, {p: rs[p]}, [p]):
                    rs[p] = list(prev[p])
            routes.append(rs)
        if not ok or not acyclic_rounds(model, routes):
            continue
        sched = make_schedule(model, routes, lp_bound=bound)
        if not sched.consistent:
            continue
        if best is None or sched.touches < best.touches:
            best = sched
    if best is None:
        raise NoFeasibleSample(f"no valid sample in {attempts} attempts")
    return best
