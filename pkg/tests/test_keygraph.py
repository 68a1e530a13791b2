import itertools

import numpy as np
import pytest

from conftest import brute_isomorphisms, random_points
from keygraphs.errors import StructureMismatch
from keygraphs.geometry import delaunay
from keygraphs.keygraph import (CIRCUIT3, CIRCUIT4, PAIR2, Keygraph, canonical_rotation,
                                enumerate_model_keygraphs, extract_scene_keygraphs, get_structure,
                                is_keytuple, is_valid_keygraph, isomorphisms, keytuples_of, rotate)


def _random_graph(rng, s):
    vs = random_points(rng, s.k + 2)[: s.k]
    vs = [vs[i] for i in rng.permutation(s.k)]
    return Keygraph(s, tuple(vs))


def test_rotate_convention():
    assert rotate(("a", "b", "c"), 1) == ("c", "a", "b")
    assert rotate(("a", "b", "c"), 3) == ("a", "b", "c")


@pytest.mark.parametrize("s,count", [(PAIR2, 1), (CIRCUIT3, 3), (CIRCUIT4, 4)])
def test_keytuple_counts(s, count):
    g = _random_graph(np.random.default_rng(0), s)
    ks = keytuples_of(g)
    assert len(ks) == count
    assert len({k.ordering for k in ks}) == count
    for k in ks:
        assert is_keytuple(k.ordering, g.arcs, s)
    # every keytuple is found: brute force over all orderings
    all_kt = [o for o in itertools.permutations(g.vertices) if is_keytuple(o, g.arcs, s)]
    assert set(all_kt) == {k.ordering for k in ks}


@pytest.mark.parametrize("s", [PAIR2, CIRCUIT3, CIRCUIT4])
def test_isomorphisms_match_permutation_oracle(s):
    rng = np.random.default_rng(1)
    for _ in range(50):
        gm, gs = _random_graph(rng, s), _random_graph(rng, s)
        fast = {frozenset(iso) for iso in isomorphisms(gm, gs)}
        assert fast == brute_isomorphisms(gm, gs)
        assert len(fast) == len(isomorphisms(gm, gs))


def test_structure_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(StructureMismatch):
        isomorphisms(_random_graph(rng, CIRCUIT3), _random_graph(rng, CIRCUIT4))
    with pytest.raises(ValueError):
        get_structure("pent")


def _brute_model_graphs(pts, s, min_dist, max_dist):
    out = set()
    for combo in itertools.permutations(pts, s.k):
        g = Keygraph(s, combo)
        if is_valid_keygraph(g, min_dist, max_dist):
            out.add(canonical_rotation(combo) if s.is_circuit else combo)
    return sorted(out)


@pytest.mark.parametrize("s", [PAIR2, CIRCUIT3, CIRCUIT4])
@pytest.mark.parametrize("seed", range(4))
def test_model_enumeration_matches_brute_force(s, seed):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, 11, 0, 120)
    got = [g.vertices for g in enumerate_model_keygraphs(pts, s, 10, 60)]
    assert got == _brute_model_graphs(pts, s, 10, 60)


def test_model_enumeration_cap_prefers_strong_points():
    rng = np.random.default_rng(5)
    pts = random_points(rng, 14, 0, 100)
    scores = list(range(14, 0, -1))  # first points strongest
    capped = enumerate_model_keygraphs(pts, CIRCUIT3, 10, 100, max_graphs=5, scores=scores)
    assert len(capped) == 5
    full = set(g.vertices for g in enumerate_model_keygraphs(pts, CIRCUIT3, 10, 100))
    assert {g.vertices for g in capped} <= full


@pytest.mark.parametrize("s", [PAIR2, CIRCUIT3, CIRCUIT4])
def test_scene_keygraphs_come_from_triangulation(s):
    rng = np.random.default_rng(3)
    pts = random_points(rng, 30, 0, 200)
    tri = delaunay(pts)
    graphs = extract_scene_keygraphs(tri, s, min_dist=10)
    edges = {frozenset((pts[i], pts[j])) for i, j in tri.edges}
    assert graphs
    for g in graphs:
        assert is_valid_keygraph(g, 10)
        for a, b in g.arcs:
            assert frozenset((a, b)) in edges
    if s is CIRCUIT3:
        assert len(graphs) <= len(tri.faces)
    if s is PAIR2:
        assert len(graphs) % 2 == 0


def test_isomorphism_counts():
    tri_m = Keygraph(CIRCUIT3, ((0, 0), (20, 0), (20, 20)))
    tri_s = Keygraph(CIRCUIT3, ((5, 5), (40, 5), (30, 30)))
    assert len(isomorphisms(tri_m, tri_s)) == 3
    pair_m = Keygraph(PAIR2, ((0, 0), (20, 0)))
    pair_s = Keygraph(PAIR2, ((9, 9), (0, 40)))
    assert isomorphisms(pair_m, pair_s) == [(((0, 0), (9, 9)), ((20, 0), (0, 40)))]


def test_triangle_keytuples_are_the_three_rotations():
    a, b, c = (0, 0), (20, 0), (20, 20)
    ks = {k.ordering for k in keytuples_of(Keygraph(CIRCUIT3, (a, b, c)))}
    assert ks == {(a, b, c), (c, a, b), (b, c, a)}


def test_close_points_never_share_a_keygraph():
    pts = [(0, 0), (5, 3), (40, 0), (40, 40), (0, 40)]
    for s in (PAIR2, CIRCUIT3, CIRCUIT4):
        for g in enumerate_model_keygraphs(pts, s, 10, 100):
            assert not {(0, 0), (5, 3)} <= set(g.vertices)


def test_collinear_points_have_no_circuits():
    pts = [(10 * i, 5 * i) for i in range(8)]
    assert enumerate_model_keygraphs(pts, CIRCUIT3, 10, 100) == []


def test_square_gives_one_quad():
    pts = [(0, 0), (10, 0), (10, 10), (0, 10)]
    quads = extract_scene_keygraphs(delaunay(pts), CIRCUIT4, 10)
    assert [g.vertices for g in quads] == [((0, 0), (10, 0), (10, 10), (0, 10))]


def test_three_point_scene():
    tri = delaunay([(0, 0), (30, 0), (10, 25)])
    assert len(extract_scene_keygraphs(tri, CIRCUIT3, 10)) == 1
    # each undirected edge yields one pair graph per direction (model pairs are directed too)
    pairs = extract_scene_keygraphs(tri, PAIR2, 10)
    assert len({frozenset(g.vertices) for g in pairs}) == 3


def test_scene_counts_are_linear():
    pts = random_points(np.random.default_rng(200), 200, 0, 1000)
    tri = delaunay(pts)
    n = len(pts)
    assert len({frozenset(g.vertices) for g in extract_scene_keygraphs(tri, PAIR2, 10)}) <= 3 * n - 6
    assert len(extract_scene_keygraphs(tri, CIRCUIT3, 10)) <= 2 * n
    for s in (CIRCUIT3, CIRCUIT4):
        for g in extract_scene_keygraphs(tri, s, 10):
            assert is_valid_keygraph(g, 10)


@pytest.mark.parametrize("s", [PAIR2, CIRCUIT3, CIRCUIT4])
def test_model_output_is_unique_and_bounded(s):
    from math import comb, factorial

    pts = random_points(np.random.default_rng(9), 12, 0, 100)
    graphs = enumerate_model_keygraphs(pts, s, 10, 100)
    assert len(set(g.vertices for g in graphs)) == len(graphs)
    bound = comb(len(pts), s.k) * factorial(s.k - 1) * (2 if s is PAIR2 else 1)
    assert len(graphs) <= bound
    for g in graphs:
        assert is_valid_keygraph(g, 10, 100)
