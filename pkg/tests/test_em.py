import itertools
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pwe import em
from pwe.em import Codebook, EmFunction, codebook_lookup, forward, merge
from pwe.errors import EmptyFunctionList, MismatchedCellCount, UnknownFunction, UnknownPort


def steer(src, dst, bias=(0, 0, 0, 0), eff=0.8):
    return EmFunction(f"steer:{src}>{dst}", em.STEER, src, (dst,), bias, eff)


def stub_tile(images=None):
    images = images or {"p1": ("p2",), "p2": ("p1",), "p3": ()}
    ports = {p: em.Port(p, (1.0, 0.0, 0.0), "tile_link") for p in ("p1", "p2", "p3")}
    return SimpleNamespace(ports=ports, specular_partners=images.get, specular_efficiency=1.0, collimating=True)


def test_merge_single_is_identity():
    f = steer("a", "b", (1, 2, 3, 0))
    m = merge([f])
    assert m.merged_bias == f.bias
    assert m.per_constituent_efficiency[f.function_id] == f.efficiency


def test_merge_identical_keeps_efficiency():
    f = steer("a", "b", (1, 2, 3, 0))
    g = EmFunction("steer:c>d", em.STEER, "c", ("d",), (1, 2, 3, 0), 0.7)
    m = merge([f, g])
    assert m.per_constituent_efficiency == {f.function_id: 0.8, g.function_id: 0.7}


def test_merge_low_tie_example():
    f1 = EmFunction("steer:a>b", em.STEER, "a", ("b",), (1, 1, 2, 2), 0.8)
    f2 = EmFunction("steer:c>d", em.STEER, "c", ("d",), (1, 3, 3, 2), 0.9)
    m = merge([f1, f2])
    assert m.merged_bias == (1, 1, 2, 2)
    assert m.per_constituent_efficiency[f1.function_id] == pytest.approx(0.8)
    assert m.per_constituent_efficiency[f2.function_id] == pytest.approx(0.45)


def test_merge_errors():
    with pytest.raises(EmptyFunctionList):
        merge([])
    with pytest.raises(MismatchedCellCount):
        merge([steer("a", "b", (1, 2)), steer("c", "d", (1, 2, 3))])


biases = st.lists(st.integers(0, 3), min_size=6, max_size=6)


@given(st.lists(st.tuples(biases, st.floats(0.05, 1.0)), min_size=1, max_size=4))
def test_merge_permutation_invariant(specs):
    fns = [EmFunction(f"steer:u{i}>v{i}", em.STEER, f"u{i}", (f"v{i}",), b, e) for i, (b, e) in enumerate(specs)]
    ref = merge(fns)
    for perm in itertools.islice(itertools.permutations(fns), 6):
        m = merge(perm)
        assert m.merged_bias == ref.merged_bias
        assert m.per_constituent_efficiency == ref.per_constituent_efficiency


@given(biases, st.floats(0.05, 1.0))
def test_merge_duplicates_idempotent(b, e):
    f = EmFunction("steer:a>b", em.STEER, "a", ("b",), b, e)
    assert merge([f, f]).per_constituent_efficiency == {f.function_id: e}


def test_forward_steer_match():
    tile = stub_tile()
    assert forward(tile, merge([steer("p1", "p3")]), "p1") == {"p3": pytest.approx(0.8)}


def test_forward_absorb_is_empty():
    tile = stub_tile()
    fn = EmFunction("absorb:p1", em.ABSORB, "p1", (), (0, 0, 0, 0), 0.9)
    assert forward(tile, merge([fn]), "p1") == {}


def test_forward_unintended_goes_specular():
    tile = stub_tile()
    assert forward(tile, merge([steer("p1", "p3")]), "p2") == {"p1": 0.25}


def test_forward_deactivated_is_specular():
    assert forward(stub_tile(), None, "p2") == {"p1": 1.0}


def test_forward_splits_mirror_between_partners():
    tile = stub_tile({"p1": ("p2", "p3"), "p2": ("p1",), "p3": ("p1",)})
    assert forward(tile, None, "p1") == {"p2": 0.5, "p3": 0.5}


def test_forward_unknown_port():
    with pytest.raises(UnknownPort):
        forward(stub_tile(), None, "nope")


@given(st.lists(st.tuples(st.sampled_from(["p1", "p2", "p3"]), st.sampled_from(["p1", "p2", "p3"]), biases,
                          st.floats(0.05, 1.0)), min_size=1, max_size=5),
       st.sampled_from(["p1", "p2", "p3"]))
def test_forward_conserves_energy(specs, port):
    fns = [EmFunction(f"steer:{a}>{b}", em.STEER, a, (b,), bias, e) for a, b, bias, e in specs if a != b]
    if not fns:
        return
    out = forward(stub_tile(), merge(fns), port)
    assert sum(out.values()) <= 1.0 + 1e-12
    assert all(0 <= v <= 1 for v in out.values())


def test_codebook_lookup_and_roundtrip():
    f = steer("a", "b", (1, 0, 2, 3))
    cb = Codebook(4, {f.function_id: f})
    assert codebook_lookup(cb, f.function_id) is f
    with pytest.raises(UnknownFunction):
        codebook_lookup(cb, "steer:x>y")
    back = Codebook.loads(cb.dumps())
    assert codebook_lookup(back, f.function_id) == f


def test_descriptor_roundtrip():
    d = em.describe(em.SPLIT, "a", ["b", "c"])
    template, src, outs, phase = em.parse_descriptor(d)
    assert (template, src, set(outs), phase) == (em.SPLIT, "a", {"b", "c"}, 0.0)
