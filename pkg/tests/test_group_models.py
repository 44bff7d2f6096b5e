import logging
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarse_ends.errors import CapacityError, ConfigurationError, DomainError
from coarse_ends.group_models import (
    CosetTable,
    DirectProduct,
    FreeAbelian,
    FreeGroup,
    FreeProduct,
    SubsetSpec,
    build_cayley_ball,
    model_from_description,
    trace_subset,
    word_distance,
)

from oracles import free_reduce, free_words, group_bfs_distance, l1, lattice_ball

Z2 = FreeAbelian(2)
F2 = FreeGroup(2)


def test_ball_sizes_small():
    assert len(build_cayley_ball(Z2, 2)) == 13
    assert build_cayley_ball(Z2, 2).layer_sizes() == [1, 4, 8]
    assert len(build_cayley_ball(F2, 3)) == 53
    assert build_cayley_ball(F2, 3).layer_sizes() == [1, 4, 12, 36]


def test_ball_with_odd_generators():
    Z = FreeAbelian(1, [(2,), (-2,), (3,), (-3,)])
    b = build_cayley_ball(Z, 1)
    assert sorted(g[0] for g in b.elements) == [-3, -2, 0, 2, 3]


@pytest.mark.parametrize("R", range(0, 9))
def test_layer_counts_closed_form(R):
    zl = build_cayley_ball(Z2, R).layer_sizes()
    assert zl == [1] + [4 * k for k in range(1, R + 1)]
    assert len(build_cayley_ball(Z2, R)) == 2 * R * R + 2 * R + 1
    if R <= 7:
        fl = build_cayley_ball(F2, R).layer_sizes()
        assert fl == [1] + [4 * 3 ** (k - 1) for k in range(1, R + 1)]


def test_ball_order_is_canonical():
    b = build_cayley_ball(F2, 3)
    keys = [(int(b.lengths[i]), g) for i, g in enumerate(b.elements)]
    assert keys == sorted(keys)
    assert b.elements[0] == F2.identity


def test_capacity_error_names_cap():
    with pytest.raises(CapacityError, match="100"):
        build_cayley_ball(F2, 6, cap=100)


def test_symmetrize_warns(caplog):
    with caplog.at_level(logging.WARNING):
        m = FreeAbelian(1, [(2,), (3,)])
    assert "not symmetric" in caplog.text
    assert set(m.generators) == {(2,), (-2,), (3,), (-3,)}
    caplog.clear()
    with caplog.at_level(logging.WARNING):
        FreeAbelian(2)
        FreeGroup(3)
    assert caplog.text == ""


def test_empty_generating_set():
    with pytest.raises(ConfigurationError):
        FreeAbelian(1, [(0,)])


@pytest.mark.parametrize("model", [Z2, F2, DirectProduct([F2, FreeAbelian(1)]), FreeProduct([FreeAbelian(1), FreeAbelian(1)])])
def test_group_axioms_on_ball(model):
    b = build_cayley_ball(model, 3)
    e = model.identity
    for g in b.elements:
        assert model.multiply(e, g) == g
        assert model.multiply(g, model.invert(g)) == e
        assert model.multiply(model.invert(g), g) == e
    keys = {model.key(g) for g in b.elements}
    assert len(keys) == len(b)
    for s in model.generators:
        assert model.invert(s) in model.generators


def test_associativity_sample():
    rng = np.random.default_rng(3)
    for model in (F2, FreeProduct([FreeAbelian(1), FreeGroup(1)]), DirectProduct([Z2, F2])):
        b = build_cayley_ball(model, 3)
        for _ in range(200):
            x, y, z = (b.elements[i] for i in rng.integers(len(b), size=3))
            assert model.multiply(model.multiply(x, y), z) == model.multiply(x, model.multiply(y, z))


def test_free_product_of_z_and_z_is_free():
    assert build_cayley_ball(FreeProduct([FreeAbelian(1), FreeAbelian(1)]), 4).layer_sizes() == [1, 4, 12, 36, 108]


def test_free_parse_and_format():
    assert F2.format(F2.parse("aBba")) == "aa"
    assert F2.parse("") == F2.identity
    with pytest.raises(ConfigurationError):
        F2.parse("z")


def test_word_distance_matches_l1():
    b = build_cayley_ball(Z2, 6)
    for p in b.elements[::7]:
        for q in b.elements[::5]:
            d = word_distance(b, p, q)
            if d.exact:
                assert d.value == l1(p, q)


def test_word_distance_free_lengths():
    b = build_cayley_ball(F2, 6)
    for w in free_words(2, 6):
        g = F2.parse(w)
        assert word_distance(b, F2.identity, g) == (len(free_reduce(w)), True)


def test_word_distance_examples():
    b = build_cayley_ball(Z2, 3)
    assert word_distance(b, (1, 0), (0, 1)).value == 2
    bf = build_cayley_ball(F2, 3)
    assert word_distance(bf, F2.parse("a"), F2.parse("b")).value == 2
    Z = FreeAbelian(1, [(2,), (-2,), (3,), (-3,)])
    bz = build_cayley_ball(Z, 3)
    # oracle: search the full Cayley graph of Z with generators {±2, ±3}
    expected = group_bfs_distance([2, -2, 3, -3], lambda g, s: g + s, 0, 1)
    assert expected == 2
    assert word_distance(bz, (0,), (1,)) == (expected, True)


def test_word_distance_outside_ball():
    b = build_cayley_ball(Z2, 2)
    with pytest.raises(DomainError):
        word_distance(b, (0, 0), (5, 0))


def test_traces():
    b = build_cayley_ball(Z2, 2)
    axis = trace_subset(b, SubsetSpec("subgroup", ((1, 0),)))
    assert sorted(b.elements[i] for i in axis) == [(-2, 0), (-1, 0), (0, 0), (1, 0), (2, 0)]
    coset = trace_subset(b, SubsetSpec("coset", ((1, 0),), element=(0, 1)))
    assert sorted(b.elements[i] for i in coset) == [(-1, 1), (0, 1), (1, 1)]
    bf = build_cayley_ball(F2, 2)
    tr = trace_subset(bf, SubsetSpec("subgroup", (F2.parse("a"),)))
    assert sorted(F2.format(bf.elements[i]) for i in tr) == sorted(["AA", "A", "", "a", "aa"])


def test_trace_unknown_predicate():
    b = build_cayley_ball(Z2, 1)
    with pytest.raises(ConfigurationError):
        trace_subset(b, SubsetSpec("predicate", name="nope"))
    assert list(trace_subset(b, SubsetSpec("predicate", name="identity"))) == [0]


def test_trace_closed_under_generators():
    for model, gens in ((Z2, ((2, 1),)), (F2, (F2.parse("ab"), F2.parse("bA")))):
        b = build_cayley_ball(model, 6)
        tr = {b.elements[i] for i in trace_subset(b, SubsetSpec("subgroup", gens))}
        assert model.identity in tr
        for g in tr:
            for s in gens + tuple(model.invert(x) for x in gens):
                h = model.multiply(s, g)
                if h in b:
                    assert h in tr


def test_folded_membership_against_enumeration():
    # oracle: all reduced products of up to 4 generators of <ab, ba>
    gens = ["ab", "ba", "BA", "AB"]
    members = {""}
    layer = {""}
    for _ in range(4):
        layer = {free_reduce(w + g) for w in layer for g in gens}
        members |= layer
    P = F2.subgroup([F2.parse("ab"), F2.parse("ba")])
    for w in free_words(2, 4):
        if w in members:
            assert P.contains(F2.parse(w)), w
    assert not P.contains(F2.parse("a"))
    assert not P.contains(F2.parse("b"))


def test_lattice_membership():
    P = Z2.subgroup([(2, 0), (1, 3)])
    for v in lattice_ball(6):
        # (x, y) in the lattice iff y = 3k and x - k even
        y_ok = v[1] % 3 == 0
        expected = y_ok and (v[0] - v[1] // 3) % 2 == 0
        assert P.contains(v) == expected


def test_coset_table():
    T = CosetTable(Z2, 2, [[1, 0], [0, 1]])
    assert T.contains((4, 7)) and not T.contains((3, 0))
    assert T.coset_of((-1, 0)) == 1
    with pytest.raises(ConfigurationError):
        CosetTable(Z2, 2, [[0, 0], [0, 1]])
    with pytest.raises(ConfigurationError):
        SubsetSpec("finite-index").subgroup(Z2)


def test_model_from_description():
    m = model_from_description({"kind": "direct-product", "factors": [{"kind": "free", "rank": 2},
                                                                      {"kind": "free-abelian", "rank": 1}]})
    assert build_cayley_ball(m, 2).layer_sizes() == [1, 6, 22]
    with pytest.raises(ConfigurationError):
        model_from_description({"kind": "braid"})


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from("aAbB"), max_size=12), st.lists(st.sampled_from("aAbB"), max_size=12))
def test_free_multiply_matches_reduction(u, v):
    u, v = "".join(u), "".join(v)
    assert F2.format(F2.multiply(F2.parse(u), F2.parse(v))) == free_reduce(u + v)


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_lattice_ball_membership(v):
    b = build_cayley_ball(Z2, 6)
    assert (v in b) == (abs(v[0]) + abs(v[1]) <= 6)


def test_product_single_factor_subgroups():
    m = DirectProduct([Z2, F2])
    with pytest.raises(ConfigurationError):
        m.subgroup([((1, 0), F2.parse("a"))])
    P = m.subgroup([((1, 0), F2.identity)])
    assert P.contains(((5, 0), F2.identity))
    assert not P.contains(((5, 0), F2.parse("a")))
    fp = FreeProduct([FreeAbelian(1), FreeAbelian(1)])
    Q = fp.subgroup([fp.parse([[0, 2]])])
    assert Q.contains(fp.parse([[0, 4]]))
    assert not Q.contains(fp.parse([[0, 1]]))
    assert list(product([1], [2])) == [(1, 2)]
