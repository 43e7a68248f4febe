import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwe.errors import DegeneratePoints, SideLengthNonPositive, ZeroAreaSurface
from pwe.geometry import Box, Floorplan, RectilinearHall, Surface, VisibilityKind, tile_surface, visibility

C = 299_792_458.0


def wall(w, h, sid="w"):
    return Surface(sid, (0, 0, 0), (w, 0, 0), (0, 0, h), normal=(0, 1, 0))


def test_three_by_three_wall():
    tiles = tile_surface(wall(3, 3), 1.0)
    assert len(tiles) == 9
    assert {t.tile_id for t in tiles} == {f"w-{i}-{j}" for i in range(3) for j in range(3)}


def test_single_tile_covers_wall():
    (t,) = tile_surface(wall(3, 3), 3.0)
    assert t.center == (1.5, 0.0, 1.5)


def test_five_by_three_centers():
    tiles = tile_surface(wall(5, 3), 1.0)
    expected = {(i + 0.5, 0.0, j + 0.5) for i in range(5) for j in range(3)}
    assert len(tiles) == 15
    assert {t.center for t in tiles} == expected
    assert all(t.normal == (0.0, 1.0, 0.0) for t in tiles)


def test_tile_surface_errors():
    with pytest.raises(SideLengthNonPositive):
        tile_surface(wall(3, 3), 0.0)
    with pytest.raises(ZeroAreaSurface):
        Surface("z", (0, 0, 0), (1, 0, 0), (2, 0, 0))


def test_truncation():
    tiles = tile_surface(wall(3.5, 2), 1.0, allow_truncation=True)
    assert len(tiles) == 6


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([0.5, 1.0, 2.0]))
def test_tiles_disjoint_and_cover(nu, nv, side):
    s = wall(nu * side, nv * side)
    tiles = tile_surface(s, side)
    assert math.isclose(sum(t.side_length ** 2 for t in tiles), s.area)
    centers = np.array([t.center for t in tiles])
    d = np.abs(centers[:, None, :] - centers[None, :, :]).max(axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= side - 1e-9


def test_empty_room_is_los():
    v = visibility((0, 0, 1), (4, 3, 1), Floorplan(()), 60e9)
    assert v.kind == VisibilityKind.LOS and v.attenuation_factor == 1.0


def test_obstacle_on_midpoint_blocks():
    fp = Floorplan((), (Box((1.5, -1, 0), (2.5, 1, 2)),))
    assert visibility((0, 0, 1), (4, 0, 1), fp, 60e9).kind == VisibilityKind.BLOCKED


def test_thirty_percent_clearance():
    f, L = 60e9, 10.0
    lam = C / f
    # largest first-zone radius among 16 interior samples sits at t = 8/17
    t = 8 / 17
    r = math.sqrt(lam * (t * L) * ((1 - t) * L) / L)
    gap = 0.3 * r
    fp = Floorplan((), (Box((0, -1, 0), (L, -gap, 2)),))
    v = visibility((0, 0, 1), (L, 0, 1), fp, f)
    assert v.kind == VisibilityKind.NLOS
    assert v.clearance_ratio == pytest.approx(0.3, rel=1e-9)
    assert v.attenuation_factor == pytest.approx(10 ** (-6 * (0.6 - 0.3) / 0.6 / 10), rel=1e-9)
    assert v.attenuation_factor == pytest.approx(0.50, abs=0.005)


def test_degenerate_points():
    with pytest.raises(DegeneratePoints):
        visibility((1, 1, 1), (1, 1, 1), Floorplan(()), 60e9)


pts = st.tuples(*[st.floats(0.1, 9.9) for _ in range(3)])


@settings(max_examples=60)
@given(pts, pts)
def test_visibility_symmetric(p, q):
    if np.allclose(p, q):
        return
    fp = Floorplan((), (Box((4, 4, 0), (6, 6, 3)), Box((1, 7, 0), (2, 8, 10))))
    a, b = visibility(p, q, fp, 60e9), visibility(q, p, fp, 60e9)
    assert a.kind == b.kind
    assert a.attenuation_factor == pytest.approx(b.attenuation_factor, rel=1e-9)


@settings(max_examples=60)
@given(pts, pts, st.floats(0.1, 0.9))
def test_shrinking_obstacles_never_blocks_los(p, q, factor):
    if np.allclose(p, q):
        return
    boxes = (Box((4, 4, 0), (6, 6, 3)), Box((1, 7, 0), (2, 8, 10)))
    before = visibility(p, q, Floorplan((), boxes), 60e9)
    after = visibility(p, q, Floorplan((), tuple(b.shrunk(factor) for b in boxes)), 60e9)
    if before.kind == VisibilityKind.LOS:
        assert after.kind == VisibilityKind.LOS


def test_hall_walls_face_inward():
    hall = RectilinearHall(outline=[(0, 0), (4, 0), (4, 3), (0, 3)], ceiling_rects=[(0, 0, 4, 3)])
    fp = hall.floorplan()
    center = np.array([2.0, 1.5, 1.5])
    for s in fp.walls:
        mid = np.array(s.origin) + 0.5 * np.array(s.edge_u) + 0.5 * np.array(s.edge_v)
        assert np.dot(center - mid, s.normal) > 0
