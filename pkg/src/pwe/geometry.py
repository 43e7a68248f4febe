"""Axis-aligned floorplans, tile grids and Fresnel-zone visibility.

Coordinates are metres in a right-handed frame with ``z`` pointing up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegeneratePoints, GeometryError, SideLengthNonPositive, ZeroAreaSurface

SPEED_OF_LIGHT = 299_792_458.0

LOS_CLEARANCE = 0.6
NLOS_MAX_PENALTY_DB = 6.0
FRESNEL_SAMPLES = 16

_EPS = 1e-9


def _vec(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(3)


@dataclass(frozen=True)
class Surface:
    """Planar rectangle ``origin + s*edge_u + t*edge_v`` with ``s, t`` in [0, 1].

    The normal defaults to ``edge_u x edge_v``; pass ``normal`` explicitly to
    point it into the room when the edge order does not.
    """

    surface_id: str
    origin: tuple
    edge_u: tuple
    edge_v: tuple
    normal: tuple | None = None
    coated: bool = True
    collimating: bool = True
    specular_efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.specular_efficiency <= 1.0:
            raise GeometryError("specular_efficiency must lie in (0, 1]")
        u, v = _vec(self.edge_u), _vec(self.edge_v)
        cross = np.cross(u, v)
        area = float(np.linalg.norm(cross))
        if area <= _EPS:
            raise ZeroAreaSurface(f"surface {self.surface_id!r} has zero area")
        if self.normal is None:
            n = cross / area
        else:
            n = _vec(self.normal)
            n = n / np.linalg.norm(n)
            if abs(abs(float(n @ cross / area)) - 1.0) > 1e-6:
                raise GeometryError(f"normal of {self.surface_id!r} is not perpendicular to the surface")
        object.__setattr__(self, "origin", tuple(map(float, self.origin)))
        object.__setattr__(self, "edge_u", tuple(map(float, u)))
        object.__setattr__(self, "edge_v", tuple(map(float, v)))
        object.__setattr__(self, "normal", tuple(map(float, n)))

    @property
    def area(self) -> float:
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))

    def contains(self, point, tol: float = 1e-6) -> bool:
        p = _vec(point) - _vec(self.origin)
        u, v, n = _vec(self.edge_u), _vec(self.edge_v), _vec(self.normal)
        if abs(p @ n) > tol:
            return False
        s = p @ u / (u @ u)
        t = p @ v / (v @ v)
        return -tol <= s <= 1 + tol and -tol <= t <= 1 + tol


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = _vec(self.lo), _vec(self.hi)
        if np.any(hi <= lo):
            raise GeometryError(f"box corners out of order: {lo} / {hi}")
        object.__setattr__(self, "lo", tuple(map(float, lo)))
        object.__setattr__(self, "hi", tuple(map(float, hi)))

    def shrunk(self, factor: float) -> "Box":
        lo, hi = np.array(self.lo), np.array(self.hi)
        c, h = (lo + hi) / 2, (hi - lo) / 2 * factor
        return Box(tuple(c - h), tuple(c + h))


@dataclass(frozen=True)
class Floorplan:
    walls: tuple
    obstacles: tuple = ()
    ceiling_height: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.ceiling_height <= 0:
            raise GeometryError("ceiling_height must be positive")
        ids = [w.surface_id for w in self.walls]
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate surface ids")
        if self.walls and self.obstacles:
            lo, hi = self.bounds()
            for box in self.obstacles:
                if np.any(np.array(box.lo) < lo - 1e-6) or np.any(np.array(box.hi) > hi + 1e-6):
                    raise GeometryError(f"obstacle {box} lies outside the wall bounding volume")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        corners = []
        for w in self.walls:
            o, u, v = _vec(w.origin), _vec(w.edge_u), _vec(w.edge_v)
            corners += [o, o + u, o + v, o + u + v]
        pts = np.array(corners)
        return pts.min(axis=0), pts.max(axis=0)

    def surface(self, surface_id: str) -> Surface:
        for w in self.walls:
            if w.surface_id == surface_id:
                return w
        raise KeyError(surface_id)


@dataclass(frozen=True)
class TilePlacement:
    tile_id: str
    surface_id: str
    center: tuple
    normal: tuple
    side_length: float
    coated: bool = True
    collimating: bool = True
    specular_efficiency: float = 1.0


def tile_surface(surface: Surface, side_length: float, allow_truncation: bool = False) -> list[TilePlacement]:
    """Cover ``surface`` with a grid of square tiles.

    Tiles are named ``<surface_id>-<i>-<j>`` with ``i`` counting along
    ``edge_u``. A trailing partial row/column is dropped when
    ``allow_truncation`` is set; otherwise a non-dividing side length raises.
    """
    if side_length <= 0:
        raise SideLengthNonPositive(f"side_length must be positive, got {side_length}")
    if surface.area <= _EPS:
        raise ZeroAreaSurface(surface.surface_id)
    u, v = _vec(surface.edge_u), _vec(surface.edge_v)
    lu, lv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    counts = []
    for length in (lu, lv):
        n = math.floor(length / side_length + 1e-9)
        if abs(n * side_length - length) > 1e-9 and not allow_truncation:
            raise GeometryError(
                f"side {side_length} does not divide edge {length} of {surface.surface_id!r}"
            )
        counts.append(n)
    if counts[0] == 0 or counts[1] == 0:
        raise GeometryError(f"surface {surface.surface_id!r} smaller than one tile")
    uh, vh = u / lu, v / lv
    origin = _vec(surface.origin)
    tiles = []
    for i in range(counts[0]):
        for j in range(counts[1]):
            c = origin + uh * side_length * (i + 0.5) + vh * side_length * (j + 0.5)
            tiles.append(
                TilePlacement(
                    tile_id=f"{surface.surface_id}-{i}-{j}",
                    surface_id=surface.surface_id,
                    center=tuple(float(x) for x in c),
                    normal=surface.normal,
                    side_length=float(side_length),
                    coated=surface.coated,
                    collimating=surface.collimating,
                    specular_efficiency=surface.specular_efficiency,
                )
            )
    return tiles


class VisibilityKind(str, Enum):
    LOS = "LOS"
    NLOS = "nLOS"
    BLOCKED = "blocked"


@dataclass(frozen=True)
class Visibility:
    kind: VisibilityKind
    clearance_ratio: float
    attenuation_factor: float


def nlos_attenuation(clearance: float, threshold: float = LOS_CLEARANCE,
                     max_penalty_db: float = NLOS_MAX_PENALTY_DB) -> float:
    """Power factor for partial first-Fresnel-zone clearance.

    Linear dB penalty: 0 dB at ``threshold`` clearance rising to
    ``max_penalty_db`` at zero clearance.
    """
    deficit = max(0.0, threshold - clearance) / threshold
    return 10.0 ** (-max_penalty_db * deficit / 10.0)


def segments_hit_box(p: np.ndarray, q: np.ndarray, lo, hi) -> np.ndarray:
    """Vectorised slab test: does the open segment ``p[i]q[i]`` pass through the box interior?

    Touching a face (segment endpoints on a wall, or running along a face)
    does not count as a hit.
    """
    p = np.atleast_2d(p).astype(float)
    q = np.atleast_2d(q).astype(float)
    lo = np.asarray(lo, dtype=float) + _EPS
    hi = np.asarray(hi, dtype=float) - _EPS
    d = q - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - p) / d
        t2 = (hi - p) / d
    tnear = np.minimum(t1, t2)
    tfar = np.maximum(t1, t2)
    parallel = np.abs(d) < 1e-15
    inside = (p > lo) & (p < hi)
    tnear = np.where(parallel, np.where(inside, -np.inf, np.inf), tnear)
    tfar = np.where(parallel, np.where(inside, np.inf, -np.inf), tfar)
    enter = np.maximum(tnear.max(axis=1), 0.0)
    leave = np.minimum(tfar.min(axis=1), 1.0)
    return leave - enter > 1e-12


def _point_box_distance(x: np.ndarray, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    gap = np.maximum(np.maximum(lo - x, 0.0), x - hi)
    return np.linalg.norm(gap, axis=-1)


def fresnel_clearance(p: np.ndarray, q: np.ndarray, obstacles, frequency_hz: float,
                      samples: int = FRESNEL_SAMPLES) -> np.ndarray:
    """Minimum first-Fresnel-zone clearance ratio in [0, 1] for each segment.

    The ratio at an interior sample point is the distance to the nearest
    obstacle divided by the local first-zone radius, capped at 1.
    """
    p = np.atleast_2d(p).astype(float)
    q = np.atleast_2d(q).astype(float)
    out = np.ones(len(p))
    if not obstacles or len(p) == 0:
        return out
    lam = SPEED_OF_LIGHT / frequency_hz
    length = np.linalg.norm(q - p, axis=1)
    t = np.arange(1, samples + 1) / (samples + 1)
    pts = p[:, None, :] + t[None, :, None] * (q - p)[:, None, :]
    d1 = t[None, :] * length[:, None]
    d2 = (1 - t)[None, :] * length[:, None]
    radius = np.sqrt(lam * d1 * d2 / np.maximum(length[:, None], 1e-300))
    for box in obstacles:
        dist = _point_box_distance(pts, box.lo, box.hi)
        ratio = np.minimum(1.0, dist / np.maximum(radius, 1e-300))
        out = np.minimum(out, ratio.min(axis=1))
    return out


def visibility_many(p, q, floorplan: Floorplan, frequency_hz: float,
                    los_clearance: float = LOS_CLEARANCE,
                    samples: int = FRESNEL_SAMPLES) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch form of :func:`visibility`.

    Returns ``(kind_codes, clearance, attenuation)`` where kind codes are
    0 = LOS, 1 = nLOS, 2 = blocked.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    blocked = np.zeros(len(p), dtype=bool)
    for box in floorplan.obstacles:
        blocked |= segments_hit_box(p, q, box.lo, box.hi)
    clearance = fresnel_clearance(p, q, floorplan.obstacles, frequency_hz, samples)
    clearance = np.where(blocked, 0.0, clearance)
    deficit = np.maximum(0.0, los_clearance - clearance) / los_clearance
    atten = 10.0 ** (-NLOS_MAX_PENALTY_DB * deficit / 10.0)
    kind = np.where(blocked, 2, np.where(clearance >= los_clearance, 0, 1))
    atten = np.where(kind == 0, 1.0, np.where(kind == 2, 0.0, atten))
    return kind, clearance, atten


def visibility(p, q, floorplan: Floorplan, frequency_hz: float,
               los_clearance: float = LOS_CLEARANCE) -> Visibility:
    """Classify the straight path between two points as LOS, nLOS or blocked."""
    p, q = _vec(p), _vec(q)
    if np.linalg.norm(p - q) < _EPS:
        raise DegeneratePoints("visibility needs two distinct points")
    if frequency_hz <= 0:
        raise GeometryError("frequency must be positive")
    kind, clearance, atten = visibility_many(p, q, floorplan, frequency_hz, los_clearance)
    kinds = (VisibilityKind.LOS, VisibilityKind.NLOS, VisibilityKind.BLOCKED)
    return Visibility(kinds[int(kind[0])], float(clearance[0]), float(atten[0]))


@dataclass
class RectilinearHall:
    """Builder for an extruded rectilinear floor outline with a flat ceiling.

    ``outline`` is a counter-clockwise list of (x, y) vertices of a polygon
    whose edges are axis-aligned; ``ceiling_rects`` partitions the ceiling
    into rectangles ``(x0, y0, x1, y1)``; ``solid_rects`` are the regions of
    the bounding box outside the outline, used as full-height obstacles.
    ``bare_ceilings`` lists indices of ceiling rectangles left uncoated and
    ``racks`` adds free-standing boxes ``(x0, y0, x1, y1, height)``.
    """

    outline: list
    ceiling_rects: list
    solid_rects: list = field(default_factory=list)
    height: float = 3.0
    coated_ceiling: bool = True
    coated_walls: bool = True
    collimating: bool = True
    bare_ceilings: tuple = ()
    racks: list = field(default_factory=list)

    def floorplan(self) -> Floorplan:
        walls = []
        pts = [tuple(map(float, v)) for v in self.outline]
        for k, (a, b) in enumerate(zip(pts, pts[1:] + pts[:1])):
            dx, dy = b[0] - a[0], b[1] - a[1]
            if abs(dx) > _EPS and abs(dy) > _EPS:
                raise GeometryError("outline edges must be axis-aligned")
            # interior lies to the left of a counter-clockwise edge
            inward = (-dy, dx, 0.0)
            walls.append(Surface(f"wall{k}", (a[0], a[1], 0.0), (dx, dy, 0.0), (0.0, 0.0, self.height),
                                 normal=inward, coated=self.coated_walls, collimating=self.collimating))
        for k, (x0, y0, x1, y1) in enumerate(self.ceiling_rects):
            walls.append(Surface(f"ceil{k}", (x0, y0, self.height), (x1 - x0, 0.0, 0.0), (0.0, y1 - y0, 0.0),
                                 normal=(0.0, 0.0, -1.0), coated=self.coated_ceiling and k not in self.bare_ceilings,
                                 collimating=self.collimating))
        obstacles = [Box((x0, y0, 0.0), (x1, y1, self.height)) for x0, y0, x1, y1 in self.solid_rects]
        obstacles += [Box((x0, y0, 0.0), (x1, y1, h)) for x0, y0, x1, y1, h in self.racks]
        return Floorplan(tuple(walls), tuple(obstacles), self.height)
