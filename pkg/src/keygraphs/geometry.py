"""Integer geometry primitives: distances, orientation, rasterization, Delaunay.

Points are ``(x, y)`` tuples of Python ints in image coordinates (x to the
right, y downward). All predicates are evaluated in exact integer arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import AllCollinear, FewerThanThreePoints

Point = tuple


class Orientation(enum.Enum):
    CLOCKWISE = 1  # on screen, with y growing downward
    COUNTERCLOCKWISE = -1
    COLLINEAR = 0


def chebyshev(p, q):
    return max(abs(q[0] - p[0]), abs(q[1] - p[1]))


def cross(a, b, c):
    """Signed doubled area of triangle abc; positive means clockwise on screen."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def orientation(a, b, c):
    s = cross(a, b, c)
    if s > 0:
        return Orientation.CLOCKWISE
    if s < 0:
        return Orientation.COUNTERCLOCKWISE
    return Orientation.COLLINEAR


def bresenham(p, q):
    """8-connected pixel chain from ``p`` to ``q``, both inclusive.

    The chain is always traced from the lexicographically smaller endpoint,
    so ``bresenham(q, p)`` is exactly ``bresenham(p, q)`` reversed. When the
    ideal line passes exactly between two pixels, the one nearer the closer
    endpoint is taken (toward the start at the exact middle), which keeps
    chains consistent under quarter-turn rotations of the image.
    """
    p = (int(p[0]), int(p[1]))
    q = (int(q[0]), int(q[1]))
    if q < p:
        return bresenham(q, p)[::-1]
    x, y = p
    dx, dy = abs(q[0] - x), abs(q[1] - y)
    sx = 1 if q[0] >= x else -1
    sy = 1 if q[1] >= y else -1
    chain = [(x, y)]
    if dx >= dy:
        err = 2 * dy - dx
        for j in range(1, dx + 1):
            if err > 0 or (err == 0 and 2 * j > dx):
                y += sy
                err -= 2 * dx
            err += 2 * dy
            x += sx
            chain.append((x, y))
    else:
        err = 2 * dx - dy
        for j in range(1, dy + 1):
            if err > 0 or (err == 0 and 2 * j > dy):
                x += sx
                err -= 2 * dy
            err += 2 * dx
            y += sy
            chain.append((x, y))
    return chain


def segments_intersect(p1, p2, q1, q2):
    """True when closed segments p1p2 and q1q2 share at least one point."""
    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
            ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True

    def on_segment(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and \
            min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (d1 == 0 and on_segment(q1, q2, p1)) or \
        (d2 == 0 and on_segment(q1, q2, p2)) or \
        (d3 == 0 and on_segment(p1, p2, q1)) or \
        (d4 == 0 and on_segment(p1, p2, q2))


def polygon_area2(poly):
    """Doubled signed area (shoelace); positive means clockwise on screen."""
    s = 0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s


def is_simple_quad(a, b, c, d):
    return not segments_intersect(a, b, c, d) and not segments_intersect(b, c, d, a)


def is_clockwise_circuit(vertices):
    """Whether the closed polygon through ``vertices`` is simple and clockwise."""
    if len(vertices) == 3:
        return cross(*vertices) > 0
    if len(vertices) == 4:
        return is_simple_quad(*vertices) and polygon_area2(vertices) > 0
    raise ValueError(f"unsupported circuit length {len(vertices)}")


def incircle(a, b, c, d):
    """Exact in-circle determinant.

    For ``a, b, c`` clockwise on screen the result is positive when ``d`` lies
    strictly inside their circumcircle, negative outside and zero when the
    four points are cocircular.
    """
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    return (alift * (bdx * cdy - cdx * bdy)
            - blift * (adx * cdy - cdx * ady)
            + clift * (adx * bdy - bdx * ady))


def incircle_perturbed(a, b, c, d, ranks):
    """Sign of :func:`incircle` under symbolic perturbation of the lifts.

    Each point's paraboloid lift is raised by an infinitesimal that shrinks
    with its rank (``ranks`` gives one per point; lower rank dominates). The
    determinant is linear in the lifts, so an exact tie is settled by the
    first point in rank order whose lift coefficient is nonzero. Returns
    -1 or +1 for any non-degenerate triangle ``abc``.
    """
    det = incircle(a, b, c, d)
    if det:
        return 1 if det > 0 else -1
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    coeffs = (
        bdx * cdy - cdx * bdy,
        -(adx * cdy - cdx * ady),
        adx * bdy - bdx * ady,
        -cross(a, b, c),
    )
    for i in sorted(range(4), key=lambda j: ranks[j]):
        if coeffs[i]:
            return 1 if coeffs[i] > 0 else -1
    return 0


@dataclass
class Triangulation:
    points: list
    faces: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    internal_edges: list = field(default_factory=list)
    # internal edge (i, j) -> (face index, face index)
    edge_faces: dict = field(default_factory=dict)


def delaunay(points):
    """Delaunay triangulation of distinct integer points.

    Points are inserted in lexicographic order (a sweep), each new point is
    fanned to the visible part of the current hull, and illegal edges are
    flipped away. Cocircular ties are resolved by symbolic perturbation, which
    makes the result unique and independent of the input order.

    Faces are index triples into ``points``, clockwise on screen, rotated to
    start at their smallest index and sorted. Edges are sorted index pairs.
    """
    pts = [(int(p[0]), int(p[1])) for p in points]
    n = len(pts)
    if n < 3:
        raise FewerThanThreePoints(f"need at least 3 points, got {n}")
    if len(set(pts)) != n:
        raise ValueError("points must be pairwise distinct")

    order = sorted(range(n), key=lambda i: pts[i])
    P = [pts[i] for i in order]  # sweep order == perturbation rank

    m = 2
    while m < n and cross(P[0], P[1], P[m]) == 0:
        m += 1
    if m == n:
        raise AllCollinear("all points are collinear")

    tv = []  # triangle vertices, clockwise on screen
    tn = []  # neighbor opposite each vertex, -1 on the hull
    nxt = {}  # hull successor; interior lies on the clockwise side of u->nxt[u]
    prv = {}
    hull_tri = {}  # u -> triangle owning hull edge (u, nxt[u])

    # fan from P[m] over the collinear prefix
    s = cross(P[0], P[1], P[m])
    for i in range(m - 1):
        if s > 0:
            tv.append([i, i + 1, m])
        else:
            tv.append([i + 1, i, m])
        tn.append([-1, -1, -1])
    for t in range(m - 1):
        # neighbour across edge (i+1, m) is t+1; across (i, m) is t-1
        i = t
        for slot in range(3):
            v = tv[t][slot]
            if v == i and t + 1 < m - 1:
                tn[t][slot] = t + 1
            elif v == i + 1 and t > 0:
                tn[t][slot] = t - 1
    if s > 0:
        chain = list(range(m)) + [m]
    else:
        chain = [m] + list(range(m - 1, -1, -1))
    for k, u in enumerate(chain):
        v = chain[(k + 1) % len(chain)]
        nxt[u] = v
        prv[v] = u
    for t in range(m - 1):
        for slot in range(3):
            if tn[t][slot] == -1:
                u = tv[t][(slot + 1) % 3]
                w = tv[t][(slot + 2) % 3]
                if nxt.get(u) == w:
                    hull_tri[u] = t

    def find_slot(t, v):
        row = tv[t]
        if row[0] == v:
            return 0
        if row[1] == v:
            return 1
        return 2

    def legalize(stack):
        while stack:
            t, i = stack.pop()
            nb = tn[t][i]
            if nb < 0:
                continue
            p = tv[t][i]
            a = tv[t][(i + 1) % 3]
            b = tv[t][(i + 2) % 3]
            j = tn[nb].index(t)
            d = tv[nb][j]
            if incircle_perturbed(P[p], P[a], P[b], P[d], (p, a, b, d)) <= 0:
                continue
            n_bp = tn[t][(i + 1) % 3]  # opposite a: edge (b, p)
            n_pa = tn[t][(i + 2) % 3]  # opposite b: edge (p, a)
            # in nb = rotation of (d, b, a): opposite b is (a, d), opposite a is (d, b)
            n_ad = tn[nb][find_slot(nb, b)]
            n_db = tn[nb][find_slot(nb, a)]
            tv[t] = [p, a, d]
            tn[t] = [n_ad, nb, n_pa]
            tv[nb] = [p, d, b]
            tn[nb] = [n_db, n_bp, t]
            if n_ad >= 0:
                tn[n_ad][tn[n_ad].index(nb)] = t
            else:
                hull_tri[a] = t
            if n_bp >= 0:
                tn[n_bp][tn[n_bp].index(t)] = nb
            else:
                hull_tri[b] = nb
            if n_pa < 0:
                hull_tri[p] = t
            if n_db < 0:
                hull_tri[d] = nb
            stack.append((t, 0))
            stack.append((nb, 0))

    def visible(u):
        return cross(P[u], P[nxt[u]], P[q]) < 0

    last = max(range(m + 1), key=lambda i: P[i])
    for q in range(m + 1, n):
        # hull edges u->nxt[u] with q on their outer side, contiguous around `last`
        start = last
        while visible(prv[start]):
            start = prv[start]
        end = start
        edges = []
        while visible(end):
            edges.append(end)
            end = nxt[end]
        new = []
        for u in edges:
            v = nxt[u]
            t_old = hull_tri.pop(u)
            tv.append([q, v, u])
            tn.append([t_old, -1, -1])
            t = len(tv) - 1
            slot = tv[t_old].index(u)
            # hull edge (u, v) in t_old is opposite its third vertex
            opp = (slot + 2) % 3
            tn[t_old][opp] = t
            new.append(t)
        for k in range(len(new) - 1):
            # new[k] = (q, v_k, u_k), new[k+1] = (q, v_{k+1}, u_{k+1}), v_k == u_{k+1}
            tn[new[k]][2] = new[k + 1]  # opposite u_k: edge (q, v_k)
            tn[new[k + 1]][1] = new[k]  # opposite v_{k+1}: edge (u_{k+1}, q)
        for u in edges[1:]:
            del nxt[u]
            del prv[u]
        nxt[start] = q
        prv[q] = start
        nxt[q] = end
        prv[end] = q
        hull_tri[start] = new[0]
        hull_tri[q] = new[-1]
        last = q
        legalize([(t, 0) for t in new])

    faces = []
    for row in tv:
        tri = [order[v] for v in row]
        k = tri.index(min(tri))
        faces.append(tuple(tri[k:] + tri[:k]))
    faces.sort()

    edge_faces = {}
    for f, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            edge_faces.setdefault(key, []).append(f)
    edges = sorted(edge_faces)
    internal = [e for e in edges if len(edge_faces[e]) == 2]
    return Triangulation(
        points=pts,
        faces=faces,
        edges=edges,
        internal_edges=internal,
        edge_faces={e: tuple(edge_faces[e]) for e in internal},
    )
