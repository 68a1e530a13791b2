"""Keygraph structures, keytuples, isomorphisms, detection in model and scene."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureMismatch
from .geometry import chebyshev, is_clockwise_circuit, polygon_area2
from .keypoint import KeypointSet

DEFAULT_MIN_DIST = 10
DEFAULT_MAX_DIST = 100


class StructureKind(enum.Enum):
    PAIR2 = "pair"
    CIRCUIT3 = "tri"
    CIRCUIT4 = "quad"


def _cycle_matrix(k):
    return tuple(tuple(1 if j == (i + 1) % k else 0 for j in range(k)) for i in range(k))


@dataclass(frozen=True)
class Structure:
    kind: StructureKind
    k: int
    sigma: tuple

    @property
    def name(self):
        return self.kind.value

    @property
    def is_circuit(self):
        return self.kind is not StructureKind.PAIR2

    def arc_positions(self):
        """Keytuple positions ``(i, j)`` joined by an arc, in row-major order."""
        return [(i, j) for i in range(self.k) for j in range(self.k) if self.sigma[i][j]]


PAIR2 = Structure(StructureKind.PAIR2, 2, ((0, 1), (0, 0)))
CIRCUIT3 = Structure(StructureKind.CIRCUIT3, 3, _cycle_matrix(3))
CIRCUIT4 = Structure(StructureKind.CIRCUIT4, 4, _cycle_matrix(4))
STRUCTURES = {s.name: s for s in (PAIR2, CIRCUIT3, CIRCUIT4)}


def get_structure(name):
    if isinstance(name, Structure):
        return name
    try:
        return STRUCTURES[name]
    except KeyError:
        raise ValueError(f"unknown structure {name!r}; choose from {sorted(STRUCTURES)}") from None


@dataclass(frozen=True)
class Keygraph:
    """A keygraph whose arcs are those of ``structure`` over ``vertices``.

    The vertex order is itself a keytuple; detection always stores the
    canonical one (circuits rotated to start at their lexicographically
    smallest vertex).
    """

    structure: Structure
    vertices: tuple

    @property
    def arcs(self):
        v = self.vertices
        return [(v[i], v[j]) for i, j in self.structure.arc_positions()]


@dataclass(frozen=True)
class Keytuple:
    ordering: tuple
    structure: Structure


@dataclass(frozen=True)
class KeygraphCorrespondence:
    model: Keygraph
    scene: Keygraph
    # (model vertex, scene vertex) pairs, in model keytuple order
    iso: tuple
    # one per arc of the scene keytuple, then optional per-vertex values
    dissimilarities: tuple = ()
    model_id: int = -1
    scene_id: int = -1
    rotation: int = 0
    vertex_dissimilarities: tuple = field(default=(), compare=False)

    def keypoint_pairs(self):
        return list(self.iso)

    @property
    def max_dissimilarity(self):
        vals = tuple(self.dissimilarities) + tuple(self.vertex_dissimilarities)
        return max(vals) if vals else 0.0


def canonical_rotation(vertices):
    """Rotate a circuit's vertex list to start at its smallest vertex."""
    vertices = tuple(vertices)
    i = vertices.index(min(vertices))
    return vertices[i:] + vertices[:i]


def rotate(ordering, r):
    """``r``-th rotation: ``(a, b, c)`` -> ``(c, a, b)`` for ``r = 1``."""
    ordering = tuple(ordering)
    k = len(ordering)
    r %= k
    return ordering[k - r:] + ordering[:k - r] if r else ordering


def is_keytuple(ordering, arcs, structure):
    arcset = set(arcs)
    k = structure.k
    return all(
        (structure.sigma[i][j] == 1) == ((ordering[i], ordering[j]) in arcset)
        for i in range(k) for j in range(k)
    )


def keytuples_of(g):
    """All keytuples of ``g``; circuits yield every rotation, pairs just one."""
    s = g.structure
    if not s.is_circuit:
        return [Keytuple(tuple(g.vertices), s)]
    return [Keytuple(rotate(g.vertices, r), s) for r in range(s.k)]


def isomorphisms(gm, gs):
    """Every isomorphism from ``gm`` to ``gs``.

    One keytuple of the scene graph is fixed and paired with each keytuple of
    the model graph. Each isomorphism is returned as a tuple of
    ``(model vertex, scene vertex)`` pairs in model keytuple order.
    """
    if gm.structure != gs.structure:
        raise StructureMismatch(f"{gm.structure.name} vs {gs.structure.name}")
    w = keytuples_of(gs)[0].ordering
    return [tuple(zip(t.ordering, w)) for t in keytuples_of(gm)]


def is_valid_keygraph(g, min_dist, max_dist=None):
    v = g.vertices
    if len(v) != g.structure.k or len(set(v)) != len(v):
        return False
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            if chebyshev(v[i], v[j]) < min_dist:
                return False
    if max_dist is not None:
        if any(chebyshev(a, b) > max_dist for a, b in g.arcs):
            return False
    if g.structure.is_circuit and not is_clockwise_circuit(v):
        return False
    return True


def _as_points(pts):
    if isinstance(pts, KeypointSet):
        return list(pts.points)
    return [tuple(p) for p in pts]


def _cross(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - \
        (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _on_box(a, b, c):
    return (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0])) & \
        (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))


def _segments_intersect(p1, p2, q1, q2):
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    proper = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & \
        (((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0)))
    touch = ((d1 == 0) & _on_box(q1, q2, p1)) | ((d2 == 0) & _on_box(q1, q2, p2)) | \
        ((d3 == 0) & _on_box(p1, p2, q1)) | ((d4 == 0) & _on_box(p1, p2, q2))
    return proper | touch


class _Enumerator:
    """Vectorized circuit search through an anchor vertex."""

    def __init__(self, P, min_dist, max_dist):
        self.P = P
        d = np.max(np.abs(P[:, None, :] - P[None, :, :]), axis=2)
        self.near = d >= min_dist
        self.arc = self.near & (d <= max_dist)

    def through(self, s, a, cand):
        """Circuits ``(a, ...)`` whose other vertices come from index array ``cand``."""
        P, near, arc = self.P, self.near, self.arc
        if s.k == 2:
            out = [(a, j) for j in cand[arc[a, cand]]]
            out += [(j, a) for j in cand[arc[cand, a]]]
            return out
        if s.k == 3:
            c = cand[arc[a, cand]]
            if len(c) < 2:
                return []
            J, K = np.meshgrid(c, c, indexing="ij")
            ok = arc[J, K] & (J != K)
            ok &= _cross(P[a][None, None, :], P[J], P[K]) > 0
            return [(a, int(j), int(k)) for j, k in zip(J[ok], K[ok])]
        # k == 4: a -> j -> c -> l -> a, diagonals a-c and j-l only need min distance
        nb = cand[near[a, cand]]
        first = nb[arc[a, nb]]
        out = []
        if len(first) < 2 or len(nb) < 3:
            return out
        pa = P[a]
        for j in first:
            cs = nb[arc[j, nb] & (nb != j)]
            ls = first[near[j, first] & (first != j)]
            if len(cs) == 0 or len(ls) == 0:
                continue
            C, L = np.meshgrid(cs, ls, indexing="ij")
            ok = arc[C, L] & (C != L)
            if not ok.any():
                continue
            C, L = C[ok], L[ok]
            pj, pc, pl = P[j][None, :], P[C], P[L]
            pa_ = np.broadcast_to(pa, pc.shape)
            pj_ = np.broadcast_to(pj, pc.shape)
            area = (pa_[:, 0] * pj_[:, 1] - pj_[:, 0] * pa_[:, 1]) + \
                (pj_[:, 0] * pc[:, 1] - pc[:, 0] * pj_[:, 1]) + \
                (pc[:, 0] * pl[:, 1] - pl[:, 0] * pc[:, 1]) + \
                (pl[:, 0] * pa_[:, 1] - pa_[:, 0] * pl[:, 1])
            simple = ~_segments_intersect(pa_, pj_, pc, pl) & ~_segments_intersect(pj_, pc, pl, pa_)
            ok = (area > 0) & simple
            out.extend((a, int(j), int(c), int(l)) for c, l in zip(C[ok], L[ok]))
        return out


def enumerate_model_keygraphs(pts, structure, min_dist=DEFAULT_MIN_DIST,
                              max_dist=DEFAULT_MAX_DIST, max_graphs=None, scores=None):
    """Exhaustive model keygraphs satisfying every geometric criterion.

    Each geometric circuit appears once, in canonical rotation. With
    ``max_graphs`` set, graphs are produced strongest-corner-first: all
    graphs among the ``r`` strongest points come before any graph using a
    weaker one, and the list is cut at ``max_graphs``. Output is sorted by
    vertex tuple.
    """
    s = get_structure(structure)
    if min_dist > max_dist:
        raise ValueError("min_dist must not exceed max_dist")
    points = _as_points(pts)
    if scores is None and isinstance(pts, KeypointSet):
        scores = pts.scores
    if len(points) < s.k:
        return []
    P = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    en = _Enumerator(P, min_dist, max_dist)
    n = len(points)
    found = []
    if max_graphs is None:
        lex = sorted(range(n), key=lambda i: points[i])
        rank = np.empty(n, dtype=np.int64)
        rank[lex] = np.arange(n)
        for a in lex:
            found.extend(en.through(s, a, np.nonzero(rank > rank[a])[0]))
    else:
        if scores is None:
            order = list(range(n))
        else:
            order = sorted(range(n), key=lambda i: (-scores[i], points[i]))
        for r, a in enumerate(order):
            found.extend(en.through(s, a, np.asarray(order[:r], dtype=np.int64)))
            if len(found) >= max_graphs:
                break
        found = found[:max_graphs]
    graphs = set()
    for t in found:
        vs = tuple(points[i] for i in t)
        graphs.add(canonical_rotation(vs) if s.is_circuit else vs)
    return [Keygraph(s, v) for v in sorted(graphs)]


def extract_scene_keygraphs(tri, structure, min_dist=DEFAULT_MIN_DIST):
    """Scene keygraphs read off a Delaunay triangulation.

    Pairs come from edges (both directions), 3-circuits from faces and
    4-circuits from the two faces around each internal edge. No maximum
    distance applies in the scene.
    """
    s = get_structure(structure)
    pts = tri.points
    out = set()

    def far_enough(vs):
        return all(chebyshev(vs[i], vs[j]) >= min_dist
                   for i in range(len(vs)) for j in range(i + 1, len(vs)))

    if s.k == 2:
        for i, j in tri.edges:
            if chebyshev(pts[i], pts[j]) >= min_dist:
                out.add((pts[i], pts[j]))
                out.add((pts[j], pts[i]))
    elif s.k == 3:
        for f in tri.faces:
            vs = tuple(pts[i] for i in f)
            if far_enough(vs) and is_clockwise_circuit(vs):
                out.add(canonical_rotation(vs))
    else:
        for e in tri.internal_edges:
            f1, f2 = tri.edge_faces[e]
            quad = _quad_from_faces(tri.faces[f1], tri.faces[f2], e)
            vs = tuple(pts[i] for i in quad)
            if polygon_area2(vs) < 0:
                vs = vs[::-1]
            if far_enough(vs) and is_clockwise_circuit(vs):
                out.add(canonical_rotation(vs))
    return [Keygraph(s, v) for v in sorted(out)]


def _quad_from_faces(f1, f2, edge):
    """Walk the symmetric difference of two faces' edge sets into a cycle."""
    def edge_set(f):
        return {frozenset((f[0], f[1])), frozenset((f[1], f[2])), frozenset((f[2], f[0]))}

    sym = edge_set(f1) ^ edge_set(f2)
    adj = {}
    for e in sym:
        u, v = tuple(e)
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    start = min(adj)
    cycle = [start]
    prev, cur = None, start
    while True:
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        if nxt == start:
            break
        cycle.append(nxt)
        prev, cur = cur, nxt
    return tuple(cycle)
