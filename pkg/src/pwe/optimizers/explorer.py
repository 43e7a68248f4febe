"""Front-propagating explorers: ant-style sampling of per-tile steering choices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import em
from ..channel import ChannelParams, PathRecord, path_power
from ..errors import NoArrivals
from ..geometry import SPEED_OF_LIGHT
from ..graph import Configuration, PweGraph, steer_configuration


@dataclass(frozen=True)
class ExplorerParams:
    spawn_fanout: int = 8
    power_threshold_w: float = 1e-28
    rounds: int = 50
    top_n: int = 3
    pheromone_decay: float = 0.1
    reinforcement: float = 1.0
    max_hops: int = 12
    steer_efficiency: float | None = None  # defaults to the codebook value
    seed: int = 0

    def __post_init__(self):
        if self.power_threshold_w <= 0:
            raise ValueError("power_threshold_w must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class ExplorerState:
    explorer_id: int
    receiver: str
    nodes: list
    lengths: list
    nlos: list
    effs: list
    delay_s: float
    power_w: float

    @property
    def position(self) -> str:
        return self.nodes[-1]


@dataclass
class ExplorerResult:
    top: dict                      # rx -> [PathRecord]
    configuration: Configuration
    arrivals: list = field(default_factory=list)   # (round, rx, nodes, power)
    first_arrival_round: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)


def explorer_search(graph: PweGraph, tx: str, rx_set, params: ExplorerParams = ExplorerParams(),
                    channel: ChannelParams = ChannelParams()) -> ExplorerResult:
    """Release explorers from ``tx`` toward every receiver in ``rx_set``.

    Each round a fresh wave of ``spawn_fanout`` explorers per receiver leaves
    the transmitter and every live explorer advances one hop. At a tile the
    explorer samples a steering output from the weight table of its
    ``(tile, in_port)``; the weight table starts uniform and is reinforced by
    arrivals in proportion to their power relative to the best arrival so far.
    Explorers whose remaining power drops below the threshold are discarded.
    """
    rx_set = sorted(rx_set)
    for r in rx_set:
        graph.user(r)
    graph.user(tx)
    rng = np.random.default_rng(params.seed)
    weights: dict = {}
    top: dict = {r: {} for r in rx_set}
    best_power = {r: 0.0 for r in rx_set}
    arrivals = []
    first_round: dict = {}
    live: list[ExplorerState] = []
    next_id = 0
    tx_pos = graph.position(tx)
    tx_ant = graph.users[tx].antenna

    def options(node, in_port, receiver, used):
        outs = []
        for nb in sorted(graph.adjacency[node]):
            if nb == in_port:
                continue
            if (nb in graph.tiles and em.STEER in graph.tiles[nb].templates) or nb == receiver:
                if graph.adjacency[node][nb] in used:
                    continue
                outs.append(nb)
        return outs

    def table(node, in_port, receiver, outs):
        key = (receiver, node, in_port)
        w = weights.setdefault(key, {})
        for o in outs:
            w.setdefault(o, 1.0)
        return np.array([w[o] for o in outs])

    def remaining(st: ExplorerState, rx_gain=1.0):
        eps_t = tx_ant.gain(graph.position(st.nodes[1]) - tx_pos)
        colls = [graph.tiles[n].collimating for n in st.nodes[1:1 + len(st.effs)]]
        return path_power(channel, eps_t, rx_gain, st.effs, st.lengths, st.nlos, colls)

    for rnd in range(1, params.rounds + 1):
        for r in rx_set:
            for _ in range(params.spawn_fanout):
                live.append(ExplorerState(next_id, r, [tx], [], [], [], 0.0, channel.tx_power_w))
                next_id += 1
        advanced = []
        for st in sorted(live, key=lambda s: s.explorer_id):
            node = st.position
            in_port = st.nodes[-2] if len(st.nodes) > 1 else None
            used = {graph.adjacency[a][b] for a, b in zip(st.nodes, st.nodes[1:])}
            if node == tx:
                outs = sorted(t for t in graph.adjacency[tx]
                              if t in graph.tiles and em.STEER in graph.tiles[t].templates)
            else:
                outs = options(node, in_port, st.receiver, used)
            if not outs:
                continue
            w = table(node, in_port, st.receiver, outs)
            nxt = outs[int(rng.choice(len(outs), p=w / w.sum()))]
            lk = graph.link(node, nxt)
            if node != tx:
                eff = params.steer_efficiency
                if eff is None:
                    eff = graph.function(node, f"steer:{in_port}>{nxt}").efficiency
                st.effs.append(eff)
            st.nodes.append(nxt)
            st.lengths.append(lk.length)
            st.nlos.append(lk.nlos_factor)
            st.delay_s += lk.length / SPEED_OF_LIGHT
            if nxt == st.receiver:
                rx_ant = graph.users[nxt].antenna
                u = graph.position(node) - graph.position(nxt)
                u = u / np.linalg.norm(u)
                p = remaining(st, rx_ant.gain(u))
                st.power_w = p
                if p < params.power_threshold_w:
                    continue
                arrivals.append((rnd, nxt, tuple(st.nodes), p))
                first_round.setdefault(nxt, rnd)
                key = tuple(st.nodes)
                if key not in top[nxt] or top[nxt][key].power_w < p:
                    trace = tuple(graph.adjacency[a][b] for a, b in zip(key, key[1:]))
                    top[nxt][key] = PathRecord(trace, p, st.delay_s, tuple(float(x) for x in u),
                                               (2 * math.pi * channel.frequency_hz * st.delay_s) % (2 * math.pi),
                                               key)
                best_power[nxt] = max(best_power[nxt], p)
                if params.reinforcement > 0:
                    delta = params.reinforcement * p / best_power[nxt]
                    for a, b, c in zip(key, key[1:], key[2:]):
                        weights[(nxt, b, a)][c] += delta
                    weights[(nxt, tx, None)][key[1]] += delta
                continue
            st.power_w = remaining(st)
            if st.power_w < params.power_threshold_w or len(st.nodes) - 1 > params.max_hops:
                continue
            advanced.append(st)
        live = advanced
        if params.pheromone_decay > 0:
            keep = 1.0 - params.pheromone_decay
            for w in weights.values():
                for o in w:
                    w[o] = 1.0 + (w[o] - 1.0) * keep
    if not arrivals:
        raise NoArrivals(f"no explorer reached {rx_set} within {params.rounds} rounds")
    ranked = {r: sorted(top[r].values(), key=lambda e: (-e.power_w, e.delay_s, e.trace))[: params.top_n]
              for r in rx_set}
    routes = [list(ranked[r][0].nodes) for r in rx_set if ranked[r]]
    config = steer_configuration(graph, routes)
    return ExplorerResult(ranked, config, arrivals, first_round, weights)
