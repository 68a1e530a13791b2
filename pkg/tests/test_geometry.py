import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import circumcircle_contains, random_points
from keygraphs.errors import AllCollinear, FewerThanThreePoints
from keygraphs.geometry import (Orientation, bresenham, chebyshev, cross, delaunay,
                                is_clockwise_circuit, is_simple_quad, orientation)

coord = st.integers(-300, 300)
point = st.tuples(coord, coord)


def test_chebyshev_is_max_coordinate_difference():
    assert chebyshev((0, 0), (3, -7)) == 7
    assert chebyshev((5, 5), (5, 5)) == 0


def test_orientation_screen_convention():
    # y grows downward, so right -> down is a clockwise turn on screen
    assert orientation((0, 0), (10, 0), (10, 10)) is Orientation.CLOCKWISE
    assert orientation((0, 0), (10, 10), (10, 0)) is Orientation.COUNTERCLOCKWISE
    assert orientation((0, 0), (1, 1), (2, 2)) is Orientation.COLLINEAR
    assert is_clockwise_circuit([(0, 0), (10, 0), (10, 10)])


def test_bresenham_horizontal_and_diagonal():
    assert bresenham((0, 0), (3, 0)) == [(0, 0), (1, 0), (2, 0), (3, 0)]
    assert bresenham((2, 2), (0, 0)) == [(2, 2), (1, 1), (0, 0)]


@settings(max_examples=300, deadline=None)
@given(point, point)
def test_bresenham_chain_properties(p, q):
    chain = bresenham(p, q)
    assert chain[0] == p and chain[-1] == q
    assert len(chain) == chebyshev(p, q) + 1
    for a, b in zip(chain, chain[1:]):
        assert chebyshev(a, b) == 1
    assert bresenham(q, p) == chain[::-1]


@settings(max_examples=200, deadline=None)
@given(point, point)
def test_bresenham_stays_within_half_pixel_of_segment(p, q):
    # oracle: distance of each pixel from the ideal line along the minor axis
    dx, dy = q[0] - p[0], q[1] - p[1]
    for x, y in bresenham(p, q):
        if abs(dx) >= abs(dy) and dx:
            ideal = p[1] + dy * (x - p[0]) / dx
            assert abs(y - ideal) <= 0.5 + 1e-12
        elif dy:
            ideal = p[0] + dx * (y - p[1]) / dy
            assert abs(x - ideal) <= 0.5 + 1e-12


def test_simple_quad_rejects_bowtie():
    assert is_simple_quad((0, 0), (10, 0), (10, 10), (0, 10))
    assert not is_simple_quad((0, 0), (10, 10), (10, 0), (0, 10))


def _check_delaunay(pts):
    tri = delaunay(pts)
    n = len(pts)
    for f in tri.faces:
        a, b, c = (pts[i] for i in f)
        assert cross(a, b, c) > 0  # clockwise on screen, non-degenerate
        for i, d in enumerate(pts):
            if i not in f:
                assert not circumcircle_contains(a, b, c, d)
    assert len(tri.edges) <= 3 * n - 6
    edges = {tuple(sorted(e)) for f in tri.faces for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))}
    assert edges == {tuple(e) for e in tri.edges}
    return tri


@pytest.mark.parametrize("seed", range(20))
def test_delaunay_empty_circumcircle_random(seed):
    rng = np.random.default_rng(seed)
    _check_delaunay(random_points(rng, int(rng.integers(3, 50))))


def test_delaunay_cocircular_grid_is_unique_and_valid():
    pts = [(x, y) for x in range(0, 50, 10) for y in range(0, 50, 10)]
    tri = _check_delaunay(pts)
    assert len(tri.faces) == 2 * 4 * 4
    shuffled = list(reversed(pts))
    tri2 = delaunay(shuffled)
    faces = {tuple(sorted(pts[i] for i in f)) for f in tri.faces}
    faces2 = {tuple(sorted(shuffled[i] for i in f)) for f in tri2.faces}
    assert faces == faces2


def test_delaunay_errors():
    with pytest.raises(FewerThanThreePoints):
        delaunay([(0, 0), (1, 1)])
    with pytest.raises(AllCollinear):
        delaunay([(0, 0), (1, 1), (2, 2), (5, 5)])
    with pytest.raises(ValueError):
        delaunay([(0, 0), (0, 0), (1, 5)])


def test_delaunay_collinear_prefix():
    pts = [(0, 0), (10, 0), (20, 0), (30, 0), (15, 12)]
    tri = _check_delaunay(pts)
    assert len(tri.faces) == 3


def test_chebyshev_examples():
    assert chebyshev((0, 0), (3, 1)) == 3
    assert chebyshev((2, 2), (2, 2)) == 0
    assert chebyshev((0, 0), (-4, 7)) == 7


def test_orientation_examples():
    assert orientation((0, 0), (1, 0), (1, 1)) is Orientation.CLOCKWISE
    assert orientation((0, 0), (0, 1), (1, 1)) is Orientation.COUNTERCLOCKWISE


def _midpoint_line(p, q):
    """Independent rasterizer: round the exact minor coordinate, ties toward the nearer end."""
    from fractions import Fraction
    import math

    if q < p:
        return _midpoint_line(q, p)[::-1]
    dx, dy = q[0] - p[0], q[1] - p[1]
    n = max(abs(dx), abs(dy))
    if n == 0:
        return [p]
    out = []
    for i in range(n + 1):
        half = Fraction(1, 2) if 2 * i <= n else -Fraction(1, 2)
        rnd = (lambda t: math.ceil(t - half)) if half > 0 else (lambda t: math.floor(t - half))
        if abs(dx) >= abs(dy):
            t = Fraction(abs(dy) * i, abs(dx))
            out.append((p[0] + (1 if dx > 0 else -1) * i, p[1] + (1 if dy >= 0 else -1) * rnd(t)))
        else:
            t = Fraction(abs(dx) * i, abs(dy))
            out.append((p[0] + (1 if dx >= 0 else -1) * rnd(t), p[1] + (1 if dy > 0 else -1) * i))
    return out


def test_bresenham_examples():
    assert bresenham((0, 0), (2, 2)) == [(0, 0), (1, 1), (2, 2)]
    assert bresenham((5, 5), (5, 5)) == [(5, 5)]
    assert bresenham((0, 0), (3, 1)) == [(0, 0), (1, 0), (2, 1), (3, 1)]
    assert _midpoint_line((0, 0), (3, 1)) == [(0, 0), (1, 0), (2, 1), (3, 1)]


@settings(max_examples=300, deadline=None)
@given(point, point)
def test_bresenham_matches_midpoint_oracle(p, q):
    assert bresenham(p, q) == _midpoint_line(p, q)


def test_bresenham_length_is_chebyshev_plus_one_bulk():
    rng = np.random.default_rng(11)
    for p, q in rng.integers(-500, 500, (10_000, 2, 2)):
        p, q = tuple(int(v) for v in p), tuple(int(v) for v in q)
        assert len(bresenham(p, q)) == chebyshev(p, q) + 1


def test_delaunay_single_triangle():
    tri = delaunay([(0, 0), (10, 0), (3, 8)])
    assert (len(tri.faces), len(tri.edges), len(tri.internal_edges)) == (1, 3, 0)


def test_delaunay_square():
    tri = _check_delaunay([(0, 0), (10, 0), (10, 10), (0, 10)])
    assert (len(tri.faces), len(tri.edges), len(tri.internal_edges)) == (2, 5, 1)


def test_delaunay_fifty_random_points():
    _check_delaunay(random_points(np.random.default_rng(50), 50, 0, 500))
