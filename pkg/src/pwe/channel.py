"""Power-delay profiles over a configured PWE graph, plus channel metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import em
from .errors import EmptyProfile, GraphError
from .geometry import SPEED_OF_LIGHT, visibility_many
from .graph import Configuration, PweGraph, link_id


@dataclass(frozen=True)
class ChannelParams:
    frequency_hz: float = 60e9
    tx_power_w: float = 1.0
    min_power_dbm: float = -250.0
    max_bounces: int = 50
    a_near: float = 1.0
    a_far: float = 2.0
    near_field_radius_m: float = 2.0
    unintended_fraction: float = em.UNINTENDED_FRACTION
    include_los: bool = True

    def __post_init__(self):
        if self.max_bounces < 1:
            raise ValueError("max_bounces must be >= 1")
        if not self.a_near < self.a_far <= 2:
            raise ValueError("need a_near < a_far <= 2")
        if self.frequency_hz <= 0 or self.tx_power_w <= 0:
            raise ValueError("frequency and tx power must be positive")

    @property
    def floor_w(self) -> float:
        return dbm_to_w(self.min_power_dbm)

    @property
    def k_factor(self) -> float:
        """(4 pi f / c)^2, the free-space constant of both path-loss forms."""
        return (4 * math.pi * self.frequency_hz / SPEED_OF_LIGHT) ** 2

    def exponent(self, length: float) -> float:
        return self.a_near if length <= self.near_field_radius_m else self.a_far


def dbm_to_w(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


def w_to_dbm(w: float) -> float:
    return 10 * math.log10(w) + 30 if w > 0 else -math.inf


# ---------------------------------------------------------------- path loss

def per_hop_power(pt, eps_t, eps_r, tile_eff, lengths, exponents, nlos, frequency_hz) -> float:
    """Received power through collimating tiles: one free-space term per hop."""
    k = (4 * math.pi * frequency_hz / SPEED_OF_LIGHT) ** 2
    den = 1.0
    for ln, a in zip(lengths, exponents):
        den *= k * ln ** a
    return pt * eps_t * eps_r * math.prod(tile_eff) / den * math.prod(nlos)


def summed_length_power(pt, eps_t, eps_r, tile_eff, lengths, alpha, nlos, frequency_hz) -> float:
    """Received power through plain reflectors: one term over the unfolded length."""
    k = (4 * math.pi * frequency_hz / SPEED_OF_LIGHT) ** 2
    return pt * eps_t * eps_r * math.prod(tile_eff) / (k * sum(lengths) ** alpha) * math.prod(nlos)


def segments(lengths, collimated) -> list:
    """Split hop lengths into runs joined by non-collimated tiles.

    ``collimated[n]`` flags the tile between hop ``n`` and hop ``n + 1``.
    """
    out, cur = [], [lengths[0]]
    for ln, c in zip(lengths[1:], collimated):
        if c:
            out.append(cur)
            cur = [ln]
        else:
            cur.append(ln)
    out.append(cur)
    return out


def path_power(params: ChannelParams, eps_t, eps_r, tile_eff, lengths, nlos, collimated) -> float:
    """Mixed-technology rule.

    Every run of hops joined by plain reflectors contributes one summed-length
    term with the far-field exponent; a run reduced to one hop next to a
    collimating tile uses the near/far exponent of that hop. All-collimated
    paths reduce to :func:`per_hop_power`, all-plain ones to :func:`summed_length_power`.
    """
    den = 1.0
    tiles = len(lengths) - 1
    for seg in segments(list(lengths), list(collimated)):
        total = sum(seg)
        a = params.exponent(total) if len(seg) == 1 and tiles > 0 else params.a_far
        den *= params.k_factor * total ** a
    return params.tx_power_w * eps_t * eps_r * math.prod(tile_eff) * math.prod(nlos) / den


# ---------------------------------------------------------------- profiles

@dataclass(frozen=True)
class PathRecord:
    trace: tuple
    power_w: float
    delay_s: float
    arrival_direction: tuple
    phase: float = 0.0
    nodes: tuple = ()

    @property
    def power_dbm(self) -> float:
        return w_to_dbm(self.power_w)


@dataclass(frozen=True)
class PowerDelayProfile:
    entries: tuple = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def powers(self) -> np.ndarray:
        return np.array([e.power_w for e in self.entries])

    @property
    def delays(self) -> np.ndarray:
        return np.array([e.delay_s for e in self.entries])

    @property
    def total_power_w(self) -> float:
        return float(sum(e.power_w for e in self.entries))

    @property
    def total_power_dbm(self) -> float:
        return w_to_dbm(self.total_power_w)


PDP_COLUMNS = ("path_index", "power_dbm", "delay_ns", "arrival_x", "arrival_y", "arrival_z", "trace")


def fmt(x: float) -> str:
    return repr(float(x))


def pdp_rows(pdp: PowerDelayProfile) -> list:
    return [
        [str(i), fmt(e.power_dbm), fmt(e.delay_s * 1e9), *(fmt(a) for a in e.arrival_direction), ";".join(e.trace)]
        for i, e in enumerate(pdp.entries)
    ]


def pdp_csv(pdp: PowerDelayProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PDP_COLUMNS)
    w.writerows(pdp_rows(pdp))
    return buf.getvalue()


def _phase_offset(active, in_port, out_port) -> float:
    if active is None:
        return 0.0
    return sum(f.phase for f in active.constituents
               if f.template == em.PHASE_SHIFT and f.in_port == in_port and out_port in f.out_ports)


def compute_pdp(graph: PweGraph, config: Configuration | None, tx_user: str, rx_user: str,
                params: ChannelParams = ChannelParams()) -> PowerDelayProfile:
    """Enumerate loop-free (in links) paths from ``tx_user`` to ``rx_user``.

    Tiles respond through :func:`pwe.em.forward_detail` under ``config``;
    tiles without an assignment reflect specularly. Other users absorb.
    Partial paths whose optimistic power bound drops below the floor are cut.
    """
    tx = graph.user(tx_user)
    rx = graph.user(rx_user)
    if tx_user == rx_user:
        raise GraphError("tx and rx must differ")
    config = config or Configuration()
    floor = params.floor_w
    k = params.k_factor
    tx_pos = np.asarray(tx.position, dtype=float)
    rx_pos = np.asarray(rx.position, dtype=float)
    records: list[PathRecord] = []
    fwd_cache: dict = {}

    def respond(tile_id, in_port):
        key = (tile_id, in_port)
        r = fwd_cache.get(key)
        if r is None:
            tile = graph.tiles[tile_id]
            dist, coll = em.forward_detail(tile, config.get(tile_id), in_port, params.unintended_fraction)
            r = (sorted(dist.items()), coll)
            fwd_cache[key] = r
        return r

    def bound(num, closed, open_len, open_n):
        a = min(params.exponent(open_len), params.a_far) if open_n == 1 else params.a_far
        a_den = k * min(open_len ** a, open_len ** params.a_far)
        return num / (closed * a_den)

    def emit(nodes, links, effs, colls, last):
        lengths = [lk.length for lk in links]
        nl = [lk.nlos_factor for lk in links]
        back = graph.position(last) - rx_pos
        u = back / np.linalg.norm(back)
        first = graph.position(nodes[1]) - tx_pos
        eps_t = tx.antenna.gain(first)
        eps_r = rx.antenna.gain(u)
        p = path_power(params, eps_t, eps_r, effs, lengths, nl, colls)
        if p < floor:
            return
        delay = sum(lengths) / SPEED_OF_LIGHT
        phase = 2 * math.pi * params.frequency_hz * delay
        for prev, node, nxt in zip(nodes, nodes[1:], nodes[2:]):
            phase += _phase_offset(config.get(node), prev, nxt)
        records.append(PathRecord(tuple(lk.link_id for lk in links), p, delay,
                                  tuple(float(x) for x in u), phase % (2 * math.pi), tuple(nodes)))

    def walk(node, in_port, nodes, links, used, effs, colls, num, closed, open_len, open_n):
        dist, coll = respond(node, in_port)
        if coll:
            closed_here = closed * k * open_len ** (params.exponent(open_len) if open_n == 1 else params.a_far)
        # a mirror bounce whose footprint covers the receiver reaches it even when the
        # port rule picks another neighbour; the launch tile gets the mirrored rule
        tile = graph.tiles[node]
        listed = {o for o, _ in dist}
        extra = []
        if rx_user in tile.ports and rx_user not in listed and tile.reflects_to(in_port, rx_user):
            extra.append(rx_user)
        if in_port == tx_user:
            extra += [q for q in tile.footprint_ports(tx_user) if q not in listed]
        if extra:
            sf = em.specular_fraction(tile, config.get(node), in_port, params.unintended_fraction)
            if sf > 0:
                dist = list(dist) + [(q, sf) for q in extra]
        if not dist:
            return
        for out, frac in dist:
            lid = graph.adjacency[node].get(out)
            if lid is None or lid in used:
                continue
            lk = graph.links[lid]
            n2 = num * frac * lk.nlos_factor
            if coll:
                c2, ol, on = closed_here, lk.length, 1
            else:
                c2, ol, on = closed, open_len + lk.length, open_n + 1
            if bound(n2, c2, ol, on) < floor:
                continue
            if out == rx_user:
                emit(nodes + [out], links + [lk], effs + [frac], colls + [coll], node)
            elif out in graph.tiles and len(nodes) - 1 < params.max_bounces:
                used.add(lid)
                walk(out, node, nodes + [out], links + [lk], used, effs + [frac], colls + [coll],
                     n2, c2, ol, on)
                used.discard(lid)

    pt = params.tx_power_w
    for t0 in sorted(graph.first_contact_tiles(tx_user)):
        lk = graph.link(tx_user, t0)
        eps_t = tx.antenna.gain(graph.position(t0) - tx_pos)
        num = pt * eps_t * lk.nlos_factor
        if bound(num, 1.0, lk.length, 1) < floor:
            continue
        walk(t0, tx_user, [tx_user, t0], [lk], {lk.link_id}, [], [], num, 1.0, lk.length, 1)

    if params.include_los:
        kind, _, atten = (visibility_many(tx_pos[None, :], rx_pos[None, :], graph.floorplan, params.frequency_hz,
                                          graph.los_clearance) if graph.floorplan is not None
                          else (np.array([0]), None, np.array([1.0])))
        if kind[0] != 2:
            d = float(np.linalg.norm(rx_pos - tx_pos))
            u = (tx_pos - rx_pos) / d
            p = path_power(params, tx.antenna.gain(-u), rx.antenna.gain(u), [], [d], [float(atten[0])], [])
            if p >= floor:
                delay = d / SPEED_OF_LIGHT
                records.append(PathRecord((link_id(tx_user, rx_user),), p, delay, tuple(float(x) for x in u),
                                          (2 * math.pi * params.frequency_hz * delay) % (2 * math.pi),
                                          (tx_user, rx_user)))

    records.sort(key=lambda r: (r.delay_s, -r.power_w, r.trace))
    return PowerDelayProfile(tuple(records))


# ---------------------------------------------------------------- metrics

def rms_delay_spread(pdp: PowerDelayProfile) -> float:
    if len(pdp) == 0:
        raise EmptyProfile("rms delay spread of an empty profile")
    p = pdp.powers
    tau = pdp.delays
    total = p.sum()
    if total <= 0:
        raise EmptyProfile("profile carries no power")
    mean = float((p * tau).sum() / total)
    # second moment minus squared mean, taken about the mean to avoid cancellation
    return math.sqrt(float((p * (tau - mean) ** 2).sum() / total))


def doppler_shifts(pdp: PowerDelayProfile, rx_velocity, frequency_hz: float) -> np.ndarray:
    v = np.asarray(rx_velocity, dtype=float)
    u = np.array([e.arrival_direction for e in pdp.entries]).reshape(-1, 3)
    return frequency_hz / SPEED_OF_LIGHT * (u @ v)


def doppler_spread(pdp: PowerDelayProfile, rx_velocity, frequency_hz: float, single_path: str = "abs") -> float:
    """Max minus min per-path shift.

    A lone path has no spread relative to itself; ``single_path="abs"``
    reports its absolute shift instead, ``"zero"`` reports 0.
    """
    if len(pdp) == 0:
        raise EmptyProfile("doppler spread of an empty profile")
    f = doppler_shifts(pdp, rx_velocity, frequency_hz)
    if len(f) == 1:
        return abs(float(f[0])) if single_path == "abs" else 0.0
    return float(f.max() - f.min())
