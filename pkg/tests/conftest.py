"""Shared fixtures and independent reference implementations for the tests."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from keygraphs.synthetic import textured_image


def brute_isomorphisms(gm, gs):
    """Every arc-preserving bijection, found by trying all k! permutations."""
    k = gm.structure.k
    arcs_m = set(gm.arcs)
    arcs_s = set(gs.arcs)
    out = set()
    for perm in itertools.permutations(range(k)):
        f = {gm.vertices[i]: gs.vertices[perm[i]] for i in range(k)}
        if {(f[a], f[b]) for a, b in arcs_m} == arcs_s:
            out.add(frozenset(f.items()))
    return out


def circumcircle_contains(a, b, c, d):
    """True if ``d`` lies strictly inside the circumcircle of triangle abc."""
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    den = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / den
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / den
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return (d[0] - ux) ** 2 + (d[1] - uy) ** 2 < r2


def direct_dft(profile, m):
    """F(u) = sum_y f(y) exp(-2 pi i u y / l) for u = 1..m, written out term by term."""
    n = len(profile)
    out = []
    for u in range(1, m + 1):
        re = sum(profile[y] * np.cos(2 * np.pi * u * y / n) for y in range(n))
        im = -sum(profile[y] * np.sin(2 * np.pi * u * y / n) for y in range(n))
        out.extend([re, im])
    v = np.array(out)
    return v / np.linalg.norm(v)


def random_points(rng, n, lo=0, hi=200):
    pts = set()
    while len(pts) < n:
        pts.add((int(rng.integers(lo, hi)), int(rng.integers(lo, hi))))
    return sorted(pts)


@pytest.fixture(scope="session")
def small_model():
    """A 160x160 textured model with a few dozen corners."""
    return textured_image(160, 160, n_shapes=10, seed=7)
