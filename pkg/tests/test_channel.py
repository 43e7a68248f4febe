import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwe import em
from pwe.channel import (ChannelParams, PathRecord, PowerDelayProfile, compute_pdp, doppler_spread, per_hop_power,
                         summed_length_power, path_power, pdp_csv, rms_delay_spread)
from pwe.errors import DuplicateId, EmptyProfile, MissingCodebook, UnknownUser
from pwe.geometry import Box, Floorplan, RectilinearHall, Surface, tile_surface, visibility, VisibilityKind
from pwe.graph import CodebookSpec, Configuration, UserNode, build_graph, steer_configuration

C = 299_792_458.0
K60 = (4 * math.pi * 60e9 / C) ** 2


def one_tile(collimating=True, tx=(0.5, 1.5, 1.5), rx=(2.3, 2.4, 1.5)):
    s = Surface("w", (0, 0, 1), (1, 0, 0), (0, 0, 1), normal=(0, 1, 0), collimating=collimating)
    fp = Floorplan((s,))
    g = build_graph(fp, tile_surface(s, 1.0), [UserNode("tx", tx), UserNode("rx", rx)], {"w": CodebookSpec()})
    return g


def room(obstacles=(), coated=True):
    hall = RectilinearHall(outline=[(0, 0), (4, 0), (4, 3), (0, 3)], ceiling_rects=[(0, 0, 4, 3)],
                           coated_walls=coated, coated_ceiling=coated)
    base = hall.floorplan()
    return Floorplan(base.walls, tuple(obstacles), base.ceiling_height)


def room_graph(fp, users):
    pl = [p for s in fp.walls for p in tile_surface(s, 1.0)]
    return build_graph(fp, pl, users, {s.surface_id: CodebookSpec() for s in fp.walls})


# ---------------------------------------------------------------- build_graph

def test_two_facing_walls_single_link():
    a = Surface("a", (0, 0, 0), (1, 0, 0), (0, 0, 1), normal=(0, 1, 0))
    b = Surface("b", (0, 3, 0), (1, 0, 0), (0, 0, 1), normal=(0, -1, 0))
    g = build_graph(Floorplan((a, b)), tile_surface(a, 1) + tile_surface(b, 1), [],
                    {"a": CodebookSpec(), "b": CodebookSpec()})
    (lk,) = g.links.values()
    assert lk.length == pytest.approx(3.0)
    assert lk.delay == pytest.approx(3.0 / C)


def test_room_is_clique_minus_coplanar():
    fp = room()
    g = room_graph(fp, [])
    tiles = sorted(g.tiles)
    for i, a in enumerate(tiles):
        for b in tiles[i + 1:]:
            same = g.tiles[a].placement.surface_id == g.tiles[b].placement.surface_id
            assert (b in g.adjacency[a]) == (not same)


def _slab_hit(p, q, lo, hi):
    t0, t1 = 0.0, 1.0
    d = q - p
    for k in range(3):
        if abs(d[k]) < 1e-15:
            if p[k] <= lo[k] or p[k] >= hi[k]:
                return False
            continue
        a, b = (lo[k] - p[k]) / d[k], (hi[k] - p[k]) / d[k]
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    return t1 - t0 > 1e-12


def test_bisecting_obstacle_cuts_links():
    wall = Box((1.95, 0, 0), (2.05, 3, 3))
    g = room_graph(room([wall]), [])
    assert g.links
    for lk in g.links.values():
        p, q = g.position(lk.a), g.position(lk.b)
        assert not _slab_hit(p, q, np.array(wall.lo), np.array(wall.hi))
        assert not ((p[0] < 1.95 and q[0] > 2.05) or (q[0] < 1.95 and p[0] > 2.05))


def test_build_graph_errors():
    s = Surface("w", (0, 0, 0), (1, 0, 0), (0, 0, 1), normal=(0, 1, 0))
    with pytest.raises(MissingCodebook):
        build_graph(Floorplan((s,)), tile_surface(s, 1), [], {})
    with pytest.raises(DuplicateId):
        build_graph(Floorplan((s,)), tile_surface(s, 1), [UserNode("u", (0, 1, 0)), UserNode("u", (0, 2, 0))],
                    {"w": CodebookSpec()})


# ---------------------------------------------------------------- path loss

def test_single_collimating_hop_matches_product_form():
    g = one_tile()
    l1 = math.dist((0.5, 1.5, 1.5), (0.5, 0.0, 1.5))
    l2 = math.dist((2.3, 2.4, 1.5), (0.5, 0.0, 1.5))
    cfg = steer_configuration(g, [["tx", "w-0-0", "rx"]])
    pdp = compute_pdp(g, cfg, "tx", "rx", ChannelParams(include_los=False))
    (e,) = pdp.entries
    a1 = 1.0 if l1 <= 2 else 2.0
    a2 = 1.0 if l2 <= 2 else 2.0
    want = 1.0 * 0.9 / (K60 * l1 ** a1 * K60 * l2 ** a2)
    assert e.power_w == pytest.approx(want, rel=1e-12)
    assert e.delay_s == pytest.approx((l1 + l2) / C, rel=1e-12)


def test_single_plain_reflector_matches_summed_form():
    g = one_tile(collimating=False)
    l1 = math.dist((0.5, 1.5, 1.5), (0.5, 0.0, 1.5))
    l2 = math.dist((2.3, 2.4, 1.5), (0.5, 0.0, 1.5))
    cfg = steer_configuration(g, [["tx", "w-0-0", "rx"]])
    (e,) = compute_pdp(g, cfg, "tx", "rx", ChannelParams(include_los=False)).entries
    assert e.power_w == pytest.approx(0.9 / (K60 * (l1 + l2) ** 2), rel=1e-12)


def test_los_only_degenerates_to_free_space():
    d = 5.0
    got = path_power(ChannelParams(), 1.0, 1.0, [], [d], [1.0], [])
    assert got == pytest.approx(1.0 / (K60 * d ** 2), rel=1e-12)
    assert got == pytest.approx(per_hop_power(1.0, 1, 1, [], [d], [2.0], [1.0], 60e9), rel=1e-12)


def test_all_absorb_no_los_is_empty():
    fp = room([Box((1.95, 0, 0), (2.05, 3, 3))])
    g = room_graph(fp, [UserNode("tx", (1, 1.5, 1)), UserNode("rx", (3, 1.5, 1))])
    cfg = Configuration({t: em.merge([g.function(t, "absorb")]) for t in g.tiles})
    assert len(compute_pdp(g, cfg, "tx", "rx")) == 0


def test_unknown_user():
    with pytest.raises(UnknownUser):
        compute_pdp(one_tile(), None, "tx", "ghost")


lengths = st.lists(st.floats(0.3, 12.0), min_size=1, max_size=5)


@given(lengths, st.floats(0.1, 1.0), st.data())
def test_lower_efficiency_never_raises_power(ls, scale, data):
    n = len(ls) - 1
    effs = data.draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    colls = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    i = data.draw(st.integers(0, max(n - 1, 0)))
    p = ChannelParams()
    base = path_power(p, 1.0, 1.0, effs, ls, [1.0] * len(ls), colls)
    if n:
        effs = list(effs)
        effs[i] *= scale
    assert path_power(p, 1.0, 1.0, effs, ls, [1.0] * len(ls), colls) <= base * (1 + 1e-12)


@given(lengths, st.data())
def test_pure_forms(ls, data):
    n = len(ls) - 1
    effs = data.draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    p = ChannelParams()
    hop_a = [p.exponent(x) for x in ls] if n else [p.a_far]
    assert path_power(p, 1, 1, effs, ls, [1.0] * len(ls), [True] * n) == pytest.approx(
        per_hop_power(1, 1, 1, effs, ls, hop_a, [1.0] * len(ls), 60e9), rel=1e-12)
    assert path_power(p, 1, 1, effs, ls, [1.0] * len(ls), [False] * n) == pytest.approx(
        summed_length_power(1, 1, 1, effs, ls, 2.0, [1.0] * len(ls), 60e9), rel=1e-12)


# ---------------------------------------------------------------- traversal properties

def test_reciprocal_delays():
    g = room_graph(room(), [UserNode("a", (0.7, 0.8, 1.2)), UserNode("b", (3.1, 2.2, 1.9))])
    fwd = compute_pdp(g, None, "a", "b", ChannelParams(max_bounces=3))
    back = compute_pdp(g, None, "b", "a", ChannelParams(max_bounces=3))
    assert len(fwd) > 1
    assert sorted(np.round(fwd.delays * 1e9, 9)) == sorted(np.round(back.delays * 1e9, 9))


def test_pruning_is_sound():
    g = room_graph(room(), [UserNode("a", (0.7, 0.8, 1.2)), UserNode("b", (3.1, 2.2, 1.9))])
    loose = compute_pdp(g, None, "a", "b", ChannelParams(max_bounces=3, min_power_dbm=-400))
    floor = -90.0
    tight = compute_pdp(g, None, "a", "b", ChannelParams(max_bounces=3, min_power_dbm=floor))
    want = sorted(e.trace for e in loose.entries if e.power_dbm >= floor)
    assert sorted(e.trace for e in tight.entries) == want


def test_pdp_rows_sorted_and_csv_header():
    g = room_graph(room(), [UserNode("a", (0.7, 0.8, 1.2)), UserNode("b", (3.1, 2.2, 1.9))])
    pdp = compute_pdp(g, None, "a", "b", ChannelParams(max_bounces=2))
    assert np.all(np.diff(pdp.delays) >= 0)
    lines = pdp_csv(pdp).splitlines()
    assert lines[0] == "path_index,power_dbm,delay_ns,arrival_x,arrival_y,arrival_z,trace"
    assert len(lines) == len(pdp) + 1


# ---------------------------------------------------------------- first contact

def test_open_ceiling_grid_first_contact():
    s = Surface("c", (0, 0, 3), (3, 0, 0), (0, 3, 0), normal=(0, 0, -1))
    g = build_graph(Floorplan((s,)), tile_surface(s, 1), [UserNode("u", (1.5, 1.5, 1))], {"c": CodebookSpec()})
    assert g.first_contact_tiles("u") == set(g.tiles)


def test_boxed_user_has_no_first_contact():
    box = [Box((1.0, 1.0, 0.0), (1.2, 2.0, 3.0)), Box((1.8, 1.0, 0.0), (2.0, 2.0, 3.0)),
           Box((1.2, 1.0, 0.0), (1.8, 1.2, 3.0)), Box((1.2, 1.8, 0.0), (1.8, 2.0, 3.0)),
           Box((1.2, 1.2, 2.0), (1.8, 1.8, 2.2))]
    fp = room(box)
    g = room_graph(fp, [UserNode("u", (1.5, 1.5, 1.0))])
    assert g.first_contact_tiles("u") == set()
    with pytest.raises(UnknownUser):
        g.first_contact_tiles("nobody")


def test_corridor_first_contact_brute_force():
    from pwe.scenario import build_scenario_graph, builtin_scenario
    g = build_scenario_graph(builtin_scenario())
    u = np.array(g.users["bot"].position)
    want = set()
    for tid, t in g.tiles.items():
        if np.dot(t.normal, u - t.center) <= 1e-9:
            continue
        if visibility(u, t.center, g.floorplan, 60e9).kind == VisibilityKind.LOS:
            want.add(tid)
    assert want and g.first_contact_tiles("bot") == want


# ---------------------------------------------------------------- metrics

def pdp_of(powers, delays_ns, dirs=None):
    dirs = dirs or [(1.0, 0.0, 0.0)] * len(powers)
    return PowerDelayProfile(tuple(PathRecord((f"l{i}",), p, d * 1e-9, u)
                                   for i, (p, d, u) in enumerate(zip(powers, delays_ns, dirs))))


def test_rms_single_path():
    assert rms_delay_spread(pdp_of([1.0], [10])) == 0.0


def test_rms_two_equal_paths():
    assert rms_delay_spread(pdp_of([2.0, 2.0], [10, 16])) == pytest.approx(3e-9, rel=1e-9)


def test_rms_hand_case():
    assert rms_delay_spread(pdp_of([1.0, 3.0], [10, 20])) == pytest.approx(math.sqrt(325 - 306.25) * 1e-9, rel=1e-9)


def test_rms_empty():
    with pytest.raises(EmptyProfile):
        rms_delay_spread(PowerDelayProfile())


@given(st.lists(st.tuples(st.floats(1e-9, 1.0), st.floats(1, 500)), min_size=1, max_size=8), st.floats(1e-3, 1e3))
def test_rms_scale_invariant(paths, s):
    p, d = zip(*paths)
    a = rms_delay_spread(pdp_of(list(p), list(d)))
    b = rms_delay_spread(pdp_of([x * s for x in p], list(d)))
    assert b == pytest.approx(a, rel=1e-6, abs=1e-18)


def test_doppler_perpendicular_zero():
    assert doppler_spread(pdp_of([1.0], [5], [(0.0, 1.0, 0.0)]), (1, 0, 0), 60e9) == 0.0


def test_doppler_head_on():
    pdp = pdp_of([1.0, 1.0], [5, 6], [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)])
    assert doppler_spread(pdp, (1, 0, 0), 60e9) == pytest.approx(2 * 60e9 / C, rel=1e-12)


def test_doppler_sixty_degrees():
    pdp = pdp_of([1.0, 1.0], [5, 6], [(1.0, 0.0, 0.0), (0.5, math.sqrt(3) / 2, 0.0)])
    assert doppler_spread(pdp, (1, 0, 0), 60e9) == pytest.approx(60e9 / C * 0.5, rel=1e-12)
    assert doppler_spread(pdp, (1, 0, 0), 60e9) == pytest.approx(100.1, abs=0.05)
