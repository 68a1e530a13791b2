"""Model storage, arc indexing and keytuple-join correspondence selection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .config import Params
from .descriptor import ArcDescriptor, describe_arcs, gaussian_blur
from .errors import EmptyModel, ParseError
from .keygraph import (Keygraph, KeygraphCorrespondence, enumerate_model_keygraphs,
                       get_structure, rotate)
from .keypoint import detect_corners

STORE_FORMAT = "keygraphs-model"
STORE_VERSION = 1


def row_distances(A, b):
    """Euclidean distance between rows of ``A`` and ``b`` (broadcast).

    Squares are accumulated column by column in a fixed order, so a value
    does not depend on how many rows are computed together. Every
    dissimilarity in this module goes through here, which keeps the indexed
    join and the exhaustive reference bit-identical.
    """
    D = np.atleast_2d(np.asarray(A, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    acc = D[:, 0] * D[:, 0]
    for c in range(1, D.shape[1]):
        acc = acc + D[:, c] * D[:, c]
    return np.sqrt(acc)


@dataclass
class SelectionParams:
    threshold: float = 0.5
    vertex_threshold: float | None = None
    # kd-tree slack for approximate search; 0 is exact
    index_eps: float = 0.0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")


@dataclass
class ModelStore:
    structure: object
    keypoints: list
    graphs: list  # vertex index tuples, canonical keytuple order
    arcs: list  # directed (i, j) keypoint index pairs
    arc_descriptors: np.ndarray
    params: dict = field(default_factory=dict)
    vertex_descriptors: np.ndarray | None = None

    def __post_init__(self):
        self.structure = get_structure(self.structure)
        self.keypoints = [tuple(int(v) for v in p) for p in self.keypoints]
        self.graphs = [tuple(int(v) for v in g) for g in self.graphs]
        self.arcs = [tuple(int(v) for v in a) for a in self.arcs]
        self.arc_descriptors = np.asarray(self.arc_descriptors, dtype=np.float64).reshape(len(self.arcs), -1)
        self._build_tables()

    def _build_tables(self):
        s = self.structure
        self.arc_lookup = {a: r for r, a in enumerate(self.arcs)}
        self._graph_cache = {}
        self.keytuples = {}
        for gid, g in enumerate(self.graphs):
            rots = range(s.k) if s.is_circuit else range(1)
            for r in rots:
                self.keytuples[rotate(g, r)] = (gid, r)
        self.arc_to_tuples = {}
        for t, (gid, r) in self.keytuples.items():
            for pos, (i, j) in enumerate(s.arc_positions()):
                row = self.arc_lookup[(t[i], t[j])]
                self.arc_to_tuples.setdefault(row, []).append((t, pos))
        self.index = cKDTree(self.arc_descriptors) if len(self.arcs) else None
        # array forms used by the vectorized join
        n = len(self.keypoints)
        self.arc_matrix = np.full((n, n), -1, dtype=np.int64)
        if self.arcs:
            a = np.asarray(self.arcs, dtype=np.int64)
            self.arc_matrix[a[:, 0], a[:, 1]] = np.arange(len(a))
        items = sorted(self.keytuples.items())
        tup = np.asarray([t for t, _ in items], dtype=np.int64).reshape(-1, s.k)
        codes = self._codes(tup)
        order = np.argsort(codes, kind="stable")
        self.keytuple_codes = codes[order]
        self.keytuple_ids = np.asarray([v for _, v in items], dtype=np.int64).reshape(-1, 2)[order]

    def _codes(self, tuples):
        n = max(len(self.keypoints), 1)
        code = np.zeros(len(tuples), dtype=np.int64)
        for c in range(tuples.shape[1]):
            code = code * n + tuples[:, c]
        return code

    def keygraph(self, gid):
        g = self._graph_cache.get(gid)
        if g is None:
            g = Keygraph(self.structure, tuple(self.keypoints[i] for i in self.graphs[gid]))
            self._graph_cache[gid] = g
        return g

    @property
    def keygraphs(self):
        return [self.keygraph(g) for g in range(len(self.graphs))]

    def descriptor(self, arc):
        return self.arc_descriptors[self.arc_lookup[arc]]

    def radius_query(self, coeffs, radius, eps=0.0):
        """Model arc rows within ``radius`` of each query row (exact when eps=0)."""
        Q = np.asarray(coeffs, dtype=np.float64).reshape(-1, self.arc_descriptors.shape[1])
        if self.index is None or len(Q) == 0:
            return [[] for _ in range(len(Q))]
        # widen slightly, then filter with the shared distance function
        cand = self.index.query_ball_point(Q, radius * (1 + 1e-9) + 1e-12, eps=eps)
        counts = np.fromiter((len(c) for c in cand), dtype=np.int64, count=len(cand))
        if counts.sum() == 0:
            return [np.zeros(0, dtype=np.int64) for _ in range(len(Q))]
        rows = np.concatenate([np.sort(np.asarray(c, dtype=np.int64)) for c in cand])
        owner = np.repeat(np.arange(len(Q)), counts)
        keep = row_distances(self.arc_descriptors[rows], Q[owner]) <= radius
        return np.split(rows[keep], np.cumsum(np.bincount(owner[keep], minlength=len(Q)))[:-1])

    # serialization

    def to_dict(self):
        d = {
            "format": STORE_FORMAT,
            "version": STORE_VERSION,
            "structure": self.structure.name,
            "params": self.params,
            "keypoints": [list(p) for p in self.keypoints],
            "graphs": [list(g) for g in self.graphs],
            "arcs": [list(a) for a in self.arcs],
            "arc_descriptors": [[float(v) for v in row] for row in self.arc_descriptors],
        }
        if self.vertex_descriptors is not None:
            d["vertex_descriptors"] = [[float(v) for v in row] for row in self.vertex_descriptors]
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != STORE_FORMAT:
            raise ParseError(f"not a {STORE_FORMAT} file")
        if d.get("version") != STORE_VERSION:
            raise ParseError(f"unsupported store version {d.get('version')}")
        vd = d.get("vertex_descriptors")
        return cls(
            structure=d["structure"],
            keypoints=d["keypoints"],
            graphs=d["graphs"],
            arcs=d["arcs"],
            arc_descriptors=np.asarray(d["arc_descriptors"], dtype=np.float64),
            params=d.get("params", {}),
            vertex_descriptors=None if vd is None else np.asarray(vd, dtype=np.float64),
        )

    @classmethod
    def loads(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid model store: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def __eq__(self, other):
        if not isinstance(other, ModelStore):
            return NotImplemented
        return (self.structure == other.structure and self.keypoints == other.keypoints
                and self.graphs == other.graphs and self.arcs == other.arcs
                and np.array_equal(self.arc_descriptors, other.arc_descriptors)
                and self.params == other.params)


def store_from_keygraphs(graphs, descriptors, structure, params=None, keypoints=None):
    """Assemble a store from keygraphs and a ``{(p, q): coeffs}`` mapping.

    Graphs with an arc lacking a valid descriptor are left out.
    """
    s = get_structure(structure)
    pts = list(keypoints) if keypoints is not None else sorted({v for g in graphs for v in g.vertices})
    pts = [tuple(p) for p in pts]
    index = {p: i for i, p in enumerate(pts)}
    kept = []
    arcs = {}
    for g in graphs:
        coeffs = []
        for a in g.arcs:
            d = descriptors.get(a)
            if isinstance(d, ArcDescriptor):
                d = d.coeffs if d.valid else None
            if d is None:
                break
            coeffs.append((a, d))
        else:
            kept.append(tuple(index[v] for v in g.vertices))
            for (p, q), d in coeffs:
                arcs[(index[p], index[q])] = np.asarray(d, dtype=np.float64)
    arc_keys = sorted(arcs)
    desc = np.array([arcs[a] for a in arc_keys]) if arc_keys else np.zeros((0, 6))
    return ModelStore(s, pts, sorted(kept), arc_keys, desc, dict(params or {}))


def build_model_store(img, structure="tri", params=None, keypoints=None):
    """Detect, enumerate, describe and index a model image.

    ``keypoints`` overrides the built-in corner detector (for externally
    computed keypoints). Raises ``EmptyModel`` when no keygraph survives.
    """
    params = params or Params(structure=get_structure(structure).name)
    s = get_structure(structure)
    if keypoints is None:
        keypoints = detect_corners(img, params.max_corners, params.quality)
    pts = list(keypoints.points if hasattr(keypoints, "points") else keypoints)
    if len(pts) < s.k:
        raise EmptyModel(f"only {len(pts)} model keypoints")
    graphs = enumerate_model_keygraphs(keypoints, s, params.min_dist, params.max_dist,
                                       max_graphs=params.model_max_graphs)
    if not graphs:
        raise EmptyModel("no model keygraph satisfies the geometric criteria")
    arcs = sorted({a for g in graphs for a in g.arcs})
    blurred = gaussian_blur(img, params.blur_sigma)
    coeffs, valid = describe_arcs(img, arcs, params.profile_len, params.coeffs, blurred=blurred)
    descriptors = {a: c for a, c, v in zip(arcs, coeffs, valid) if v}
    store_params = {
        "min_dist": params.min_dist,
        "max_dist": params.max_dist,
        "profile_len": params.profile_len,
        "coeffs": params.coeffs,
        "blur_sigma": params.blur_sigma,
        "image_size": [int(np.shape(img)[1]), int(np.shape(img)[0])],
    }
    used = sorted({v for g in graphs for v in g.vertices})
    store = store_from_keygraphs(graphs, descriptors, s, store_params, keypoints=used)
    if not store.graphs:
        raise EmptyModel("every model keygraph has a degenerate arc descriptor")
    return store


def _scene_coeffs(scene_descriptors, arc):
    d = scene_descriptors.get(arc)
    if isinstance(d, ArcDescriptor):
        return d.coeffs if d.valid else None
    return d


def _vertex_check(store, corr_pairs, scene_vertex_descriptors, vthr):
    vd = []
    for mi, sp in corr_pairs:
        sv = scene_vertex_descriptors.get(sp)
        if sv is None:
            return None
        d = float(row_distances(store.vertex_descriptors[mi], sv)[0])
        if d > vthr:
            return None
        vd.append(d)
    return tuple(vd)


def _emit(store, sid, sg, tuple_idx, gid, r, dis, scene_vertex_descriptors, p):
    vdis = ()
    if p.vertex_threshold is not None and store.vertex_descriptors is not None \
            and scene_vertex_descriptors is not None:
        vdis = _vertex_check(store, list(zip(tuple_idx, sg.vertices)), scene_vertex_descriptors,
                             p.vertex_threshold)
        if vdis is None:
            return None
    kp = store.keypoints
    return KeygraphCorrespondence(
        model=store.keygraph(gid),
        scene=sg,
        iso=tuple(zip([kp[i] for i in tuple_idx], sg.vertices)),
        dissimilarities=tuple(np.asarray(dis, dtype=np.float64).tolist()),
        model_id=gid,
        scene_id=sid,
        rotation=r,
        vertex_dissimilarities=vdis,
    )


def _sort_key(c):
    return (c.scene_id, c.model_id, c.rotation)


def _expand(starts, counts):
    """Indices ``starts[i] + 0..counts[i]-1`` for every i, and their owners."""
    owner = np.repeat(np.arange(len(starts)), counts)
    first = np.cumsum(counts) - counts
    return np.repeat(starts, counts) + (np.arange(counts.sum()) - np.repeat(first, counts)), owner


def select_correspondences(store, scene_graphs, scene_descriptors, params=None,
                           scene_vertex_descriptors=None):
    """Keygraph correspondences whose arc dissimilarities are all within threshold.

    Each scene graph's stored (canonical) keytuple is the fixed scene side.
    Candidate model keytuples are assembled by chaining radius queries along
    the keytuple's arcs, each link sharing its start with the previous end;
    the closing arc of a circuit is compared directly and the result must be
    a stored model keytuple. ``scene_descriptors`` maps directed scene arcs
    ``(p, q)`` to descriptor coefficients (or :class:`ArcDescriptor`).
    Output is sorted by (scene id, model id, rotation).
    """
    p = params or SelectionParams()
    s = store.structure
    thr = p.threshold
    k = s.k
    chain_len = 1 if k == 2 else k - 1
    dim = store.arc_descriptors.shape[1] if store.arc_descriptors.ndim == 2 else 0

    # one row per usable scene graph: query ids of its chain arcs + closing arc
    query_index, query_coeffs = {}, []
    plan_sid, plan_q, plan_close = [], [], []
    for sid, sg in enumerate(scene_graphs):
        if sg.structure != s:
            raise ValueError("scene graph structure differs from the model store")
        w = sg.vertices
        chain = [(w[t], w[t + 1]) for t in range(chain_len)]
        coeffs = [_scene_coeffs(scene_descriptors, a) for a in chain]
        closing = _scene_coeffs(scene_descriptors, (w[-1], w[0])) if k > 2 else np.zeros(dim)
        if closing is None or any(c is None for c in coeffs):
            continue
        qs = []
        for a, c in zip(chain, coeffs):
            if a not in query_index:
                query_index[a] = len(query_coeffs)
                query_coeffs.append(np.asarray(c, dtype=np.float64))
            qs.append(query_index[a])
        plan_sid.append(sid)
        plan_q.append(qs)
        plan_close.append(np.asarray(closing, dtype=np.float64))
    if not plan_sid or len(store.arcs) == 0:
        return []
    plan_q = np.asarray(plan_q, dtype=np.int64).reshape(-1, chain_len)
    plan_close = np.asarray(plan_close).reshape(len(plan_sid), dim)
    Q = np.asarray(query_coeffs)
    hits = store.radius_query(Q, thr, p.index_eps)

    # flat hit table sorted by (query, start vertex)
    n = len(store.keypoints)
    hq = np.repeat(np.arange(len(Q)), [len(h) for h in hits])
    hrow = np.concatenate(hits).astype(np.int64) if len(hq) else np.zeros(0, dtype=np.int64)
    arcs = np.asarray(store.arcs, dtype=np.int64)
    hi, hj = arcs[hrow, 0], arcs[hrow, 1]
    hd = row_distances(store.arc_descriptors[hrow], Q[hq]) if len(hrow) else np.zeros(0)
    key = hq * n + hi
    order = np.argsort(key, kind="stable")
    key, hi, hj, hd, hq = key[order], hi[order], hj[order], hd[order], hq[order]
    q_start = np.searchsorted(hq, np.arange(len(Q)), side="left")
    q_count = np.searchsorted(hq, np.arange(len(Q)), side="right") - q_start

    # first arc: every hit of the plan's first query
    idx, owner = _expand(q_start[plan_q[:, 0]], q_count[plan_q[:, 0]])
    verts = np.stack([hi[idx], hj[idx]], axis=1)
    dis = hd[idx][:, None]
    # further arcs must start where the chain currently ends
    for t in range(1, chain_len):
        want = plan_q[owner, t] * n + verts[:, -1]
        lo = np.searchsorted(key, want, side="left")
        cnt = np.searchsorted(key, want, side="right") - lo
        idx, sub = _expand(lo, cnt)
        owner = owner[sub]
        verts = np.concatenate([verts[sub], hj[idx][:, None]], axis=1)
        dis = np.concatenate([dis[sub], hd[idx][:, None]], axis=1)
    if k > 2 and len(owner):
        row = store.arc_matrix[verts[:, -1], verts[:, 0]]
        ok = row >= 0
        owner, verts, dis, row = owner[ok], verts[ok], dis[ok], row[ok]
        d = row_distances(store.arc_descriptors[row], plan_close[owner])
        ok = d <= thr
        owner, verts, dis = owner[ok], verts[ok], np.concatenate([dis[ok], d[ok][:, None]], axis=1)
    # keep only stored model keytuples
    codes = store._codes(verts)
    pos = np.searchsorted(store.keytuple_codes, codes)
    pos = np.minimum(pos, len(store.keytuple_codes) - 1)
    ok = store.keytuple_codes[pos] == codes if len(codes) else np.zeros(0, dtype=bool)
    owner, verts, dis, ids = owner[ok], verts[ok], dis[ok], store.keytuple_ids[pos[ok]]
    sids = np.asarray(plan_sid, dtype=np.int64)[owner]
    order = np.lexsort((ids[:, 1], ids[:, 0], sids))
    verts_l, ids_l, sids_l = verts.tolist(), ids.tolist(), sids.tolist()
    out = []
    for i in order.tolist():
        sid = sids_l[i]
        c = _emit(store, sid, scene_graphs[sid], verts_l[i], ids_l[i][0], ids_l[i][1], dis[i],
                  scene_vertex_descriptors, p)
        if c is not None:
            out.append(c)
    return out


def select_correspondences_naive(store, scene_graphs, scene_descriptors, params=None,
                                 scene_vertex_descriptors=None):
    """Reference selection: every scene graph x model graph x isomorphism."""
    p = params or SelectionParams()
    s = store.structure
    out = []
    positions = s.arc_positions()
    for sid, sg in enumerate(scene_graphs):
        w = sg.vertices
        scene_arc = []
        for i, j in positions:
            scene_arc.append(_scene_coeffs(scene_descriptors, (w[i], w[j])))
        if any(c is None for c in scene_arc):
            continue
        for gid, g in enumerate(store.graphs):
            for r in (range(s.k) if s.is_circuit else range(1)):
                v = rotate(g, r)
                dis = []
                for (i, j), sc in zip(positions, scene_arc):
                    row = store.arc_lookup.get((v[i], v[j]))
                    if row is None:
                        break
                    d = float(row_distances(store.arc_descriptors[row], sc)[0])
                    if d > p.threshold:
                        break
                    dis.append(d)
                else:
                    c = _emit(store, sid, sg, v, gid, r, dis, scene_vertex_descriptors, p)
                    if c is not None:
                        out.append(c)
    out.sort(key=_sort_key)
    return out


def format_correspondence_dump(corrs):
    """Lines ``model_graph_id scene_graph_id rotation d1 d2 ...``."""
    lines = []
    for c in corrs:
        vals = " ".join(f"{d:.9g}" for d in tuple(c.dissimilarities) + tuple(c.vertex_dissimilarities))
        lines.append(f"{c.model_id} {c.scene_id} {c.rotation} {vals}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")
