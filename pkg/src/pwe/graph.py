"""The PWE graph: tiles, users and the links between them, plus configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import em
from .errors import DuplicateId, InvalidConfiguration, MissingCodebook, UnknownFunction, UnknownUser
from .geometry import SPEED_OF_LIGHT, Floorplan, TilePlacement, visibility_many

TILE_LINK = "tile_link"
USER_LINK = "user_link"
OFF = "off"


@dataclass(frozen=True)
class Antenna:
    """Port-efficiency mask of a user device.

    ``horn`` follows ``cos^m`` of the angle to boresight with ``m`` chosen so
    the mask is at -3 dB at half the beamwidth; ``sidelobe`` is the floor
    applied outside the main lobe.
    """

    kind: str = "isotropic"
    boresight: tuple = (0.0, 0.0, 1.0)
    beamwidth_deg: float = 80.0
    sidelobe: float = 1e-3
    efficiency: float = 1.0

    @property
    def exponent(self) -> float:
        return math.log(0.5) / math.log(math.cos(math.radians(self.beamwidth_deg / 2)))

    def gain(self, direction) -> float:
        if self.kind == "isotropic":
            return self.efficiency
        d = np.asarray(direction, dtype=float)
        b = np.asarray(self.boresight, dtype=float)
        c = float(d @ b / (np.linalg.norm(d) * np.linalg.norm(b)))
        main = c ** self.exponent if c > 0 else 0.0
        return self.efficiency * max(self.sidelobe, main)


@dataclass(frozen=True)
class UserNode:
    user_id: str
    position: tuple
    antenna: Antenna = Antenna()
    label: str | None = None


@dataclass(frozen=True)
class Link:
    link_id: str
    a: str
    b: str
    length: float
    nlos_factor: float
    kind: str

    @property
    def delay(self) -> float:
        return self.length / SPEED_OF_LIGHT

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


def link_id(a: str, b: str) -> str:
    return f"{a}~{b}" if a < b else f"{b}~{a}"


@dataclass(frozen=True)
class CodebookSpec:
    """Manufacturing profile of a coated surface.

    Steering-type functions absent from ``entries`` are synthesised on demand
    as quantised phase gradients over a ``rows x cols`` cell grid.
    """

    rows: int = 8
    cols: int = 8
    levels: int = 4
    steer_efficiency: float = 0.9
    templates: tuple = em.TEMPLATES
    entries: tuple = ()

    @property
    def cell_count(self) -> int:
        return self.rows * self.cols


class TileNode:
    """A tile with its ports.

    Tile-to-tile ports never change for a given graph; user ports are kept
    apart so that moving a user only rebuilds the user part.
    """

    def __init__(self, placement: TilePlacement, templates: tuple, tile_ports: dict, user_ports: dict,
                 _static=None):
        self.placement = placement
        self.tile_id = placement.tile_id
        self.templates = templates
        self.tile_ports = tile_ports
        self.user_ports = user_ports
        self.ports = {**tile_ports, **user_ports}
        if _static is None:
            ids = sorted(tile_ports)
            dirs = np.array([tile_ports[i].direction for i in ids]).reshape(-1, 3)
            dist = np.array([tile_ports[i].distance for i in ids])
            _static = (ids, dirs, dist, {})
        self._static = _static

    @property
    def collimating(self) -> bool:
        return self.placement.collimating and self.placement.coated

    @property
    def specular_efficiency(self) -> float:
        return self.placement.specular_efficiency

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.placement.center)

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.placement.normal)

    def with_user_ports(self, user_ports: dict) -> "TileNode":
        return TileNode(self.placement, self.templates, self.tile_ports, user_ports, self._static)

    def _mirror(self, in_port: str) -> np.ndarray:
        n = self.normal
        d = -np.asarray(self.ports[in_port].direction)
        return d - 2 * (d @ n) * n

    def _footprint(self, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        """Row-wise: does the mirror image of ``src`` see ``dst`` through this tile's square?"""
        n = self.normal
        img = src - 2 * (src @ n)[:, None] * n
        span = (dst - img) @ n
        ok = np.abs(span) >= 1e-12
        t = np.where(ok, -(img @ n) / np.where(ok, span, 1.0), -1.0)
        ok &= (t > 0.0) & (t < 1.0)
        hit = img + t[:, None] * (dst - img)
        u = np.cross(n, (0.0, 0.0, 1.0))
        if np.linalg.norm(u) < 1e-9:
            u = np.array([1.0, 0.0, 0.0])
        u = u / np.linalg.norm(u)
        v = np.cross(n, u)
        half = self.placement.side_length / 2 + 1e-9
        return ok & (np.abs(hit @ u) <= half) & (np.abs(hit @ v) <= half)

    def _port_vec(self, pid: str) -> np.ndarray:
        p = self.ports[pid]
        return np.asarray(p.direction) * p.distance

    def reflects_to(self, in_port: str, out_port: str) -> bool:
        """Whether the mirror image of ``in_port`` sees ``out_port`` through this tile's square."""
        return bool(self._footprint(self._port_vec(in_port)[None, :], self._port_vec(out_port))[0])

    def footprint_ports(self, user_port: str) -> tuple:
        """Tile ports whose mirror image sees ``user_port`` through this tile."""
        ids, dirs, dist, memo = self._static
        p = self.ports[user_port]
        key = ("footprint", user_port, p.direction, p.distance)
        hit = memo.get(key)
        if hit is None:
            mask = self._footprint(dirs * dist[:, None], self._port_vec(user_port)) if ids else []
            hit = tuple(i for i, m in zip(ids, mask) if m)
            memo[key] = hit
        return hit

    def specular_image(self, in_port: str) -> str | None:
        """Port closest to the mirror direction of a wave arriving from ``in_port``.

        Ties (collinear ports) go to the nearer neighbour, then the smaller id.
        """
        ids, dirs, dist, memo = self._static
        best = memo.get(in_port) if in_port in self.tile_ports else None
        if best is None:
            r = self._mirror(in_port)
            best = (-np.inf, np.inf, None)
            if ids:
                scores = dirs @ r
                top = scores.max()
                cand = np.flatnonzero(scores >= top - 1e-12)
                k = min(cand, key=lambda c: (dist[c], ids[c]))
                best = (float(scores[k]), float(dist[k]), ids[k])
            if in_port in self.tile_ports:
                memo[in_port] = best
        if not self.user_ports:
            return best[2]
        r = self._mirror(in_port)
        score, d, pid = best
        for uid in sorted(self.user_ports):
            p = self.user_ports[uid]
            s = float(np.asarray(p.direction) @ r)
            if s > score + 1e-12 or (abs(s - score) <= 1e-12 and (p.distance, uid) < (d, pid or "")):
                score, d, pid = s, p.distance, uid
        return pid

    def specular_partners(self, in_port: str) -> tuple:
        """Mirror partner of ``in_port``: its image, kept only when the pairing is mutual.

        Requiring ``image(image(p)) == p`` makes the relation symmetric, so
        plain reflection paths are reciprocal.
        """
        cache = self.__dict__.setdefault("_partners", {})
        hit = cache.get(in_port)
        if hit is None:
            img = self.specular_image(in_port)
            hit = (img,) if img is not None and self.specular_image(img) == in_port else ()
            cache[in_port] = hit
        return hit

    def __repr__(self):
        return f"TileNode({self.tile_id!r}, ports={len(self.ports)})"


class PweGraph:
    """Immutable graph of tiles and users. Build with :func:`build_graph`."""

    def __init__(self, floorplan, tiles: dict, users: dict, links: dict, codebooks: dict,
                 frequency_hz: float, los_clearance: float):
        self.floorplan = floorplan
        self.tiles = tiles
        self.users = users
        self.links = links
        self.codebook_specs = codebooks
        self.frequency_hz = frequency_hz
        self.los_clearance = los_clearance
        self.adjacency: dict = {n: {} for n in (*tiles, *users)}
        for lk in links.values():
            self.adjacency[lk.a][lk.b] = lk.link_id
            self.adjacency[lk.b][lk.a] = lk.link_id
        self._functions: dict = {}

    # -- lookup
    def node_ids(self) -> list:
        return sorted(self.adjacency)

    def is_tile(self, node: str) -> bool:
        return node in self.tiles

    def position(self, node: str) -> np.ndarray:
        if node in self.tiles:
            return self.tiles[node].center
        return np.asarray(self.users[node].position, dtype=float)

    def neighbors(self, node: str) -> dict:
        return self.adjacency[node]

    def link(self, a: str, b: str) -> Link:
        return self.links[self.adjacency[a][b]]

    def user(self, user_id: str) -> UserNode:
        try:
            return self.users[user_id]
        except KeyError:
            raise UnknownUser(user_id) from None

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    # -- codebooks
    def supported_templates(self, tile_id: str) -> tuple:
        return self.tiles[tile_id].templates

    def codebook(self, tile_id: str) -> em.Codebook:
        tile = self.tiles[tile_id]
        spec = self.codebook_specs.get(tile.placement.surface_id)
        if spec is None:
            return em.Codebook(0, {em.SPECULAR: em.EmFunction(em.SPECULAR, em.SPECULAR)})
        entries = {f.function_id: f for f in spec.entries}
        return em.Codebook(spec.cell_count, entries, lambda fid, t=tile_id: self._synthesize(t, fid))

    def function(self, tile_id: str, function_id: str) -> em.EmFunction:
        key = (tile_id, function_id)
        fn = self._functions.get(key)
        if fn is None:
            fn = em.codebook_lookup(self.codebook(tile_id), function_id)
            self._functions[key] = fn
        return fn

    def _synthesize(self, tile_id: str, function_id: str) -> em.EmFunction | None:
        tile = self.tiles[tile_id]
        spec = self.codebook_specs.get(tile.placement.surface_id)
        template, src, outs, phase = em.parse_descriptor(function_id)
        if template not in tile.templates:
            return None
        if template == em.SPECULAR:
            return em.EmFunction(em.SPECULAR, em.SPECULAR)
        n_cells = spec.cell_count
        if template == em.ABSORB:
            if src is not None and src not in tile.ports:
                return None
            return em.EmFunction(function_id, em.ABSORB, src, (), (spec.levels,) * n_cells, spec.steer_efficiency)
        if src not in tile.ports or any(o not in tile.ports for o in outs) or src in outs:
            return None
        pl = tile.placement
        surface = self.floorplan.surface(pl.surface_id) if self.floorplan is not None else None
        if surface is not None:
            u_hat = np.asarray(surface.edge_u) / np.linalg.norm(surface.edge_u)
        else:
            u_hat = np.cross(tile.normal, [0.0, 0.0, 1.0])
            if np.linalg.norm(u_hat) < 1e-9:
                u_hat = np.array([1.0, 0.0, 0.0])
            u_hat = u_hat / np.linalg.norm(u_hat)
        v_hat = np.cross(tile.normal, u_hat)
        in_prop = -np.asarray(tile.ports[src].direction)

        def profile(out, offset=0.0):
            return em.quantized_phase_profile(in_prop, np.asarray(tile.ports[out].direction), u_hat, v_hat,
                                              pl.side_length, spec.rows, spec.cols, spec.levels,
                                              self.wavelength, offset)

        if template == em.SPLIT:
            parts = [em.EmFunction(f"steer:{src}>{o}", em.STEER, src, (o,), profile(o), spec.steer_efficiency)
                     for o in outs]
            bias = em.merge(parts).merged_bias
        elif template == em.PHASE_SHIFT:
            bias = profile(outs[0], phase)
        elif template == em.POLARIZE:
            bias = tuple((spec.levels - b) % spec.levels for b in profile(outs[0]))
        else:
            bias = profile(outs[0])
        return em.EmFunction(function_id, template, src, outs, bias, spec.steer_efficiency, phase)

    # -- derived graphs
    def first_contact_tiles(self, user_id: str) -> set:
        self.user(user_id)
        return {n for n in self.adjacency[user_id] if n in self.tiles}

    def with_user_at(self, user_id: str, position) -> "PweGraph":
        """Copy of the graph with one user moved; tile-to-tile structure is shared."""
        old = self.user(user_id)
        moved = replace(old, position=tuple(float(x) for x in position))
        users = {**self.users, user_id: moved}
        keep = {lid: lk for lid, lk in self.links.items() if user_id not in (lk.a, lk.b)}
        new_links = _user_links(moved, self.tiles, self.floorplan, self.frequency_hz, self.los_clearance)
        keep.update({lk.link_id: lk for lk in new_links})
        touched = {lk.other(user_id) for lk in self.links.values() if user_id in (lk.a, lk.b)}
        touched |= {lk.other(user_id) for lk in new_links}
        tiles = dict(self.tiles)
        for tid in touched:
            tile = self.tiles[tid]
            uports = {k: v for k, v in tile.user_ports.items() if k != user_id}
            for lk in new_links:
                if lk.other(user_id) == tid:
                    uports[user_id] = _port(tile.center, moved.position, user_id, em.Port, USER_LINK)
            tiles[tid] = tile.with_user_ports(uports)
        g = PweGraph(self.floorplan, tiles, users, keep, self.codebook_specs, self.frequency_hz,
                     self.los_clearance)
        return g


def _port(origin, target, pid, cls, kind):
    d = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    dist = float(np.linalg.norm(d))
    return cls(pid, tuple(float(x) for x in d / dist), kind, dist)


def _user_links(user: UserNode, tiles: dict, floorplan, frequency_hz, los_clearance) -> list:
    if not tiles:
        return []
    ids = sorted(tiles)
    centers = np.array([tiles[t].placement.center for t in ids])
    normals = np.array([tiles[t].placement.normal for t in ids])
    up = np.asarray(user.position, dtype=float)
    facing = np.einsum("ij,ij->i", normals, up[None, :] - centers) > 1e-9
    out = []
    idx = np.flatnonzero(facing)
    if len(idx) == 0:
        return out
    kind, _, _ = visibility_many(np.repeat(up[None, :], len(idx), axis=0), centers[idx], floorplan,
                                 frequency_hz, los_clearance) if floorplan is not None else (
        np.zeros(len(idx), dtype=int), None, None)
    for k, i in enumerate(idx):
        if kind[k] == 0:
            length = float(np.linalg.norm(centers[i] - up))
            out.append(Link(link_id(user.user_id, ids[i]), *sorted((user.user_id, ids[i])), length, 1.0, USER_LINK))
    return out


def build_graph(floorplan: Floorplan | None, placements, users, codebooks: dict,
                frequency_hz: float = 60e9, los_clearance: float = 0.6) -> PweGraph:
    """Connect tiles and users by visibility.

    Inter-tile links need a non-blocked segment, mutually facing tiles and
    distinct planes; user-tile links need full LOS and a tile facing the
    user. ``codebooks`` maps surface ids to :class:`CodebookSpec` and is
    required for every coated tile.
    """
    placements = list(placements)
    users = list(users)
    ids = [p.tile_id for p in placements] + [u.user_id for u in users]
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(i)
        if em.RESERVED_ID_CHARS & set(i) or "~" in i or i == OFF:
            raise DuplicateId(f"node id {i!r} uses a reserved character")
        seen.add(i)
    for p in placements:
        if p.coated and p.surface_id not in codebooks:
            raise MissingCodebook(f"coated tile {p.tile_id} on surface {p.surface_id} has no codebook")

    links: list[Link] = []
    n = len(placements)
    if n > 1:
        centers = np.array([p.center for p in placements])
        normals = np.array([p.normal for p in placements])
        ii, jj = np.triu_indices(n, k=1)
        d = centers[jj] - centers[ii]
        facing = (np.einsum("ij,ij->i", normals[ii], d) > 1e-9) & (np.einsum("ij,ij->i", normals[jj], -d) > 1e-9)
        same_surface = np.array([placements[a].surface_id == placements[b].surface_id for a, b in zip(ii, jj)],
                                dtype=bool)
        coplanar = (np.einsum("ij,ij->i", normals[ii], normals[jj]) > 1 - 1e-9) & (
            np.abs(np.einsum("ij,ij->i", normals[ii], d)) < 1e-9)
        cand = np.flatnonzero(facing & ~same_surface & ~coplanar)
        if len(cand):
            if floorplan is not None:
                kind, _, atten = visibility_many(centers[ii[cand]], centers[jj[cand]], floorplan, frequency_hz,
                                                 los_clearance)
            else:
                kind, atten = np.zeros(len(cand), dtype=int), np.ones(len(cand))
            for k, c in enumerate(cand):
                if kind[k] == 2:
                    continue
                a, b = placements[ii[c]].tile_id, placements[jj[c]].tile_id
                length = float(np.linalg.norm(d[c]))
                links.append(Link(link_id(a, b), *sorted((a, b)), length, float(atten[k]), TILE_LINK))

    tile_ports: dict = {p.tile_id: {} for p in placements}
    by_id = {p.tile_id: p for p in placements}
    for lk in links:
        pa, pb = by_id[lk.a], by_id[lk.b]
        tile_ports[lk.a][lk.b] = _port(pa.center, pb.center, lk.b, em.Port, TILE_LINK)
        tile_ports[lk.b][lk.a] = _port(pb.center, pa.center, lk.a, em.Port, TILE_LINK)

    tiles = {}
    for p in placements:
        templates = codebooks[p.surface_id].templates if p.coated else (em.SPECULAR,)
        tiles[p.tile_id] = TileNode(p, tuple(templates), tile_ports[p.tile_id], {})
    graph = PweGraph(floorplan, tiles, {}, {lk.link_id: lk for lk in links}, dict(codebooks), frequency_hz,
                     los_clearance)
    for u in users:
        graph.users[u.user_id] = u
        graph.adjacency[u.user_id] = {}
        graph = graph.with_user_at(u.user_id, u.position)
    return graph


# ---------------------------------------------------------------- configurations

@dataclass(frozen=True)
class Configuration:
    """Per-tile active function; tiles missing from ``assignment`` are off (deactivated)."""

    assignment: dict = field(default_factory=dict)
    round_index: int = 0

    def get(self, tile_id: str):
        return self.assignment.get(tile_id)

    def descriptor(self, tile_id: str) -> str:
        fn = self.assignment.get(tile_id)
        return OFF if fn is None else fn.descriptor

    def with_assignment(self, updates: dict) -> "Configuration":
        merged = dict(self.assignment)
        for k, v in updates.items():
            if v is None:
                merged.pop(k, None)
            else:
                merged[k] = v
        return Configuration(merged, self.round_index)

    def to_rows(self, tile_ids) -> list:
        return [(t, self.descriptor(t)) for t in sorted(tile_ids)]


def validate_assignment(graph: PweGraph, tile_id: str, fn: em.MergedFunction) -> None:
    if tile_id not in graph.tiles:
        raise InvalidConfiguration(f"unknown tile {tile_id!r}")
    allowed = graph.supported_templates(tile_id)
    for c in fn.constituents:
        if c.template not in allowed:
            raise InvalidConfiguration(f"{tile_id} does not support {c.template}")


def merged_from_descriptor(graph: PweGraph, tile_id: str, descriptor: str) -> em.MergedFunction | None:
    if descriptor == OFF:
        return None
    try:
        fns = [graph.function(tile_id, d) for d in descriptor.split("|")]
    except UnknownFunction as exc:
        raise InvalidConfiguration(f"{tile_id}: unknown function {exc}") from None
    except KeyError as exc:
        raise InvalidConfiguration(f"unknown tile {tile_id!r}") from exc
    merged = em.merge(fns)
    validate_assignment(graph, tile_id, merged)
    return merged


def configuration_from_descriptors(graph: PweGraph, descriptors: dict, round_index: int = 0) -> Configuration:
    assignment = {}
    for tile_id, desc in descriptors.items():
        fn = merged_from_descriptor(graph, tile_id, desc)
        if fn is not None:
            assignment[tile_id] = fn
    return Configuration(assignment, round_index)


def steer_configuration(graph: PweGraph, routes, base: Configuration | None = None,
                        cap: int | None = None) -> Configuration:
    """Turn node routes ``[tx, t1, ..., tn, rx]`` into merged STEER assignments."""
    wanted: dict = {}
    for route in routes:
        for prev, node, nxt in zip(route, route[1:], route[2:]):
            wanted.setdefault(node, []).append(f"steer:{prev}>{nxt}")
    assignment = dict(base.assignment) if base is not None else {}
    for tile_id, fids in wanted.items():
        existing = [f for f in assignment[tile_id].constituents if f.template in em.ROUTING_TEMPLATES] \
            if tile_id in assignment else []
        fns = {f.function_id: f for f in existing}
        for fid in fids:
            fns[fid] = graph.function(tile_id, fid)
        if cap is not None and len(fns) > cap:
            raise InvalidConfiguration(f"{tile_id} would hold {len(fns)} functions, cap is {cap}")
        assignment[tile_id] = em.merge(fns.values())
    return Configuration(assignment, base.round_index if base is not None else 0)
