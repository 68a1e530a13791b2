"""Homography estimation: DLT, Levenberg-Marquardt refinement, keygraph RANSAC."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, SingularMatrix

DEFAULT_CONFIDENCE = 0.99
DEFAULT_INLIER_TOL = 3.0
DEFAULT_MAX_ITERATIONS = 2000
DEFAULT_MIN_INLIER_GRAPHS = 4


def normalize_homography(H):
    """Scale to unit Frobenius norm with a non-negative bottom-right entry."""
    H = np.asarray(H, dtype=np.float64).reshape(3, 3)
    norm = np.linalg.norm(H)
    if not np.isfinite(norm) or norm == 0:
        raise SingularMatrix("zero or non-finite homography")
    H = H / norm
    if H[2, 2] < 0 or (H[2, 2] == 0 and H.flat[np.flatnonzero(H)[0]] < 0):
        H = -H
    if abs(np.linalg.det(H)) <= 1e-12:
        raise SingularMatrix("homography is not invertible")
    return H


def project(H, pts):
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    x = H[0, 0] * pts[:, 0] + H[0, 1] * pts[:, 1] + H[0, 2]
    y = H[1, 0] * pts[:, 0] + H[1, 1] * pts[:, 1] + H[1, 2]
    w = H[2, 0] * pts[:, 0] + H[2, 1] * pts[:, 1] + H[2, 2]
    return np.stack([x / w, y / w], axis=1)


def format_pose(H):
    """Single line, row-major, 9 significant digits."""
    return " ".join(f"{v:.9g}" for v in np.asarray(H).ravel())


def _split_pairs(pairs):
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1:] != (2, 2):
        raise ValueError("expected a sequence of ((x, y), (x', y')) pairs")
    return arr[:, 0, :], arr[:, 1, :]


def _similarity_normalizer(pts):
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2.0) / d if d > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _has_collinear_triple(pts, tol=1e-9):
    for a, b, c in itertools.combinations(range(len(pts)), 3):
        u = pts[b] - pts[a]
        v = pts[c] - pts[a]
        scale = max(np.abs(u).max(), np.abs(v).max(), 1.0)
        if abs(u[0] * v[1] - u[1] * v[0]) <= tol * scale * scale:
            return True
    return False


def homography_dlt(pairs=None, src=None, dst=None):
    """Normalized direct linear transform from point pairs (model -> scene).

    Pass either ``pairs`` as ``((x, y), (x', y'))`` items or ``src``/``dst``
    arrays of shape ``(n, 2)``.
    """
    if pairs is not None:
        src, dst = _split_pairs(pairs)
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    n = len(src)
    if n < 4:
        raise DegenerateConfiguration(f"need at least 4 pairs, got {n}")
    if n == 4 and (_has_collinear_triple(src) or _has_collinear_triple(dst)):
        raise DegenerateConfiguration("three of the four points are collinear")
    Ts = _similarity_normalizer(src)
    Td = _similarity_normalizer(dst)
    a = src @ Ts[:2, :2].T + Ts[:2, 2]
    b = dst @ Td[:2, :2].T + Td[:2, 2]
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = a
    A[0::2, 2] = 1.0
    A[0::2, 6:8] = -b[:, 0:1] * a
    A[0::2, 8] = -b[:, 0]
    A[1::2, 3:5] = a
    A[1::2, 5] = 1.0
    A[1::2, 6:8] = -b[:, 1:2] * a
    A[1::2, 8] = -b[:, 1]
    _, sv, vt = np.linalg.svd(A)
    if sv[-2] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("point configuration does not determine a homography")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    try:
        return normalize_homography(H)
    except SingularMatrix as exc:
        raise DegenerateConfiguration(str(exc)) from None


def transfer_residuals(H, src, dst):
    return (project(H, src) - np.asarray(dst, dtype=np.float64)).ravel()


def transfer_objective(H, src, dst):
    """Sum of squared transfer errors ``|H(src) - dst|^2`` in pixels."""
    r = transfer_residuals(np.asarray(H).reshape(3, 3), src, dst)
    return float(r @ r)


def _jacobian(h, src):
    x, y = src[:, 0], src[:, 1]
    one = np.ones_like(x)
    X = np.stack([x, y, one], axis=1)
    w = X @ h[6:9]
    u = (X @ h[0:3]) / w
    v = (X @ h[3:6]) / w
    J = np.zeros((2 * len(src), 9))
    J[0::2, 0:3] = X / w[:, None]
    J[0::2, 6:9] = -u[:, None] * X / w[:, None]
    J[1::2, 3:6] = X / w[:, None]
    J[1::2, 6:9] = -v[:, None] * X / w[:, None]
    return J, np.stack([u, v], axis=1)


def transfer_gradient(H, src, dst):
    """Gradient of :func:`transfer_objective` w.r.t. the 9 entries of ``H``."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    J, proj = _jacobian(np.asarray(H, dtype=np.float64).ravel(), src)
    r = (proj - dst).ravel()
    return 2.0 * J.T @ r


@dataclass
class LMResult:
    homography: np.ndarray
    initial_cost: float
    cost: float
    iterations: int
    singular: bool = False


def lm_refine(H0, pairs=None, src=None, dst=None, max_iter=100,
              grad_tol=1e-10, step_tol=1e-12, lam=1e-3):
    """Levenberg-Marquardt minimization of the squared transfer error.

    Works in similarity-normalized coordinates, which leaves the minimizer
    unchanged because the destination scaling is isotropic. Steps are only
    accepted when they lower the cost, so the result is never worse than
    ``H0``.
    """
    if pairs is not None:
        src, dst = _split_pairs(pairs)
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) < 4:
        raise DegenerateConfiguration("need at least 4 pairs")
    H0 = normalize_homography(H0)
    Ts = _similarity_normalizer(src)
    Td = _similarity_normalizer(dst)
    scale2 = Td[0, 0] ** 2
    a = src @ Ts[:2, :2].T + Ts[:2, 2]
    b = dst @ Td[:2, :2].T + Td[:2, 2]
    h = (Td @ H0 @ np.linalg.inv(Ts)).ravel()
    h /= np.linalg.norm(h)

    def cost(hv):
        J, proj = _jacobian(hv, a)
        r = (proj - b).ravel()
        return float(r @ r), J, r

    c0, J, r = cost(h)
    c = c0
    it = 0
    singular = False
    while it < max_iter:
        it += 1
        g = J.T @ r
        if np.linalg.norm(2.0 * g) / scale2 < grad_tol:
            break
        A = J.T @ J
        try:
            delta = np.linalg.solve(A + lam * np.eye(9), -g)
        except np.linalg.LinAlgError:
            singular = True
            break
        if not np.all(np.isfinite(delta)):
            singular = True
            break
        if np.linalg.norm(delta) < step_tol:
            break
        hn = h + delta
        hn /= np.linalg.norm(hn)
        cn, Jn, rn = cost(hn)
        if np.isfinite(cn) and cn < c:
            h, c, J, r = hn, cn, Jn, rn
            lam /= 10.0
        else:
            lam *= 10.0
            if lam > 1e16:
                break
    if singular:
        return LMResult(H0, c0 / scale2, c0 / scale2, it, singular=True)
    H = np.linalg.inv(Td) @ h.reshape(3, 3) @ Ts
    try:
        H = normalize_homography(H)
    except SingularMatrix:
        return LMResult(H0, c0 / scale2, c0 / scale2, it, singular=True)
    return LMResult(H, c0 / scale2, c / scale2, it)


def expected_iterations(P, p, h):
    """RANSAC iterations to draw one all-inlier sample with confidence ``P``."""
    if not 0 < P < 1:
        raise ValueError("confidence must be in (0, 1)")
    if not 0 <= p <= 1:
        raise ValueError("inlier ratio must be in [0, 1]")
    if h < 1:
        raise ValueError("sample size must be >= 1")
    if p == 0:
        return math.inf
    if p == 1:
        return 1.0
    q = p ** h
    if q >= 1.0:
        return 1.0
    return math.log(1.0 - P) / math.log1p(-q)


@dataclass
class RansacConfig:
    confidence: float = DEFAULT_CONFIDENCE
    inlier_tol: float = DEFAULT_INLIER_TOL
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    min_inlier_graphs: int = DEFAULT_MIN_INLIER_GRAPHS
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")
        if self.inlier_tol <= 0:
            raise ValueError("inlier_tol must be positive")


@dataclass
class RansacResult:
    homography: np.ndarray
    inliers: list
    iterations: int
    score: int
    refinement: LMResult | None = field(default=None, repr=False)


def sample_size(k):
    """Correspondences per RANSAC sample for ``k``-vertex keygraphs."""
    return math.ceil(4 / k)


def _degenerate(pts):
    if len({(float(x), float(y)) for x, y in pts}) != len(pts):
        return True
    return _has_collinear_triple(pts)


_TRIPLES = {}


def _degenerate_batch(P, tol=1e-9):
    """Per sample: duplicated points or any collinear triple (``P`` is ``(B, m, 2)``)."""
    m = P.shape[1]
    if m not in _TRIPLES:
        _TRIPLES[m] = np.array(list(itertools.combinations(range(m), 3)), dtype=np.int64).reshape(-1, 3)
    t = _TRIPLES[m]
    u = P[:, t[:, 1]] - P[:, t[:, 0]]
    v = P[:, t[:, 2]] - P[:, t[:, 0]]
    scale = np.maximum(np.maximum(np.abs(u).max(axis=2), np.abs(v).max(axis=2)), 1.0)
    cr = np.abs(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0])
    collinear = (cr <= tol * scale * scale).any(axis=1)
    same = (P[:, :, None, :] == P[:, None, :, :]).all(axis=3)
    dup = (same.sum(axis=(1, 2)) > m)
    return collinear | dup


def _normalizer_batch(P):
    c = P.mean(axis=1)
    d = np.sqrt(((P - c[:, None, :]) ** 2).sum(axis=2)).mean(axis=1)
    sc = np.where(d > 0, math.sqrt(2.0) / np.where(d > 0, d, 1.0), 1.0)
    T = np.zeros((len(P), 3, 3))
    T[:, 0, 0] = sc
    T[:, 1, 1] = sc
    T[:, 0, 2] = -sc * c[:, 0]
    T[:, 1, 2] = -sc * c[:, 1]
    T[:, 2, 2] = 1.0
    return T


def _dlt_batch(src, dst):
    """Normalized DLT for ``B`` samples at once; returns ``(H, ok)``."""
    B, m, _ = src.shape
    Ts = _normalizer_batch(src)
    Td = _normalizer_batch(dst)
    a = np.einsum("bij,bmj->bmi", Ts[:, :2, :2], src) + Ts[:, None, :2, 2]
    b = np.einsum("bij,bmj->bmi", Td[:, :2, :2], dst) + Td[:, None, :2, 2]
    A = np.zeros((B, 2 * m, 9))
    A[:, 0::2, 0:2] = a
    A[:, 0::2, 2] = 1.0
    A[:, 0::2, 6:8] = -b[:, :, 0:1] * a
    A[:, 0::2, 8] = -b[:, :, 0]
    A[:, 1::2, 3:5] = a
    A[:, 1::2, 5] = 1.0
    A[:, 1::2, 6:8] = -b[:, :, 1:2] * a
    A[:, 1::2, 8] = -b[:, :, 1]
    _, sv, vt = np.linalg.svd(A)
    ok = sv[:, -2] > 1e-10 * sv[:, 0]
    Hn = vt[:, -1].reshape(B, 3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    norm = np.sqrt((H * H).sum(axis=(1, 2)))
    ok &= np.isfinite(norm) & (norm > 0)
    H = H / np.where(ok, norm, 1.0)[:, None, None]
    H = H * np.where(H[:, 2, 2] < 0, -1.0, 1.0)[:, None, None]
    with np.errstate(invalid="ignore"):
        ok &= np.abs(np.linalg.det(H)) > 1e-12
    return H, ok


def _project_batch(H, pts):
    """``(B, 3, 3)`` homographies applied to ``(u, 2)`` points -> x and y, each ``(B, u)``."""
    px, py = pts[:, 0], pts[:, 1]
    w = H[:, 2, 0, None] * px + H[:, 2, 1, None] * py + H[:, 2, 2, None]
    x = (H[:, 0, 0, None] * px + H[:, 0, 1, None] * py + H[:, 0, 2, None]) / w
    y = (H[:, 1, 0, None] * px + H[:, 1, 1, None] * py + H[:, 1, 2, None]) / w
    return x, y


def one_to_one_pairs(H, src, dst):
    """Distinct pairs with each keypoint used once, lowest transfer error first.

    Overlapping correspondences can pair one scene keypoint with two nearby
    model keypoints; only the better-fitting pair is kept for refinement.
    Returns an ``(n, 2, 2)`` array.
    """
    uniq = np.unique(np.concatenate([src, dst], axis=1), axis=0)
    if len(uniq) == 0:
        return uniq.reshape(0, 2, 2)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        err = ((project(H, uniq[:, :2]) - uniq[:, 2:]) ** 2).sum(axis=1)
    used_m, used_s, keep = set(), set(), []
    for i in np.argsort(err, kind="stable"):
        m, s = tuple(uniq[i, :2]), tuple(uniq[i, 2:])
        if m in used_m or s in used_s:
            continue
        used_m.add(m)
        used_s.add(s)
        keep.append(i)
    return uniq[sorted(keep)].reshape(-1, 2, 2)


def _draw(rng, n, h, count):
    """``count`` rows of ``h`` distinct indices below ``n``; rows with repeats are redrawn."""
    picks = rng.integers(0, n, size=(count, h))
    if h > 1:
        while True:
            srt = np.sort(picks, axis=1)
            bad = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))
            if len(bad) == 0:
                break
            picks[bad] = rng.integers(0, n, size=(len(bad), h))
    return picks


def ransac_groups(model_groups, scene_groups, h, cfg=None, batch=128):
    """RANSAC over groups of point pairs that are inliers only together.

    ``model_groups`` and ``scene_groups`` have shape ``(n, k, 2)``; every
    draw takes ``h`` whole groups. A group is an inlier when all its ``k``
    pairs transfer within ``cfg.inlier_tol``. Returns ``None`` when fewer than
    ``h`` groups exist or the best score stays below
    ``cfg.min_inlier_graphs``; otherwise the best model refined on the
    inlier pairs.

    Hypotheses are fitted and scored ``batch`` draws at a time, but consumed
    in draw order, so the result equals a one-draw-at-a-time loop.
    """
    cfg = cfg or RansacConfig()
    M = np.asarray(model_groups, dtype=np.float64)
    S = np.asarray(scene_groups, dtype=np.float64)
    n = len(M)
    if n < h or n == 0:
        return None
    k = M.shape[1]
    # score each distinct keypoint pair once and gather per group
    um, inv_m = np.unique(M.reshape(-1, 2), axis=0, return_inverse=True)
    us, inv_s = np.unique(S.reshape(-1, 2), axis=0, return_inverse=True)
    codes, inv_p = np.unique(inv_m.ravel() * len(us) + inv_s.ravel(), return_inverse=True)
    pair_m, pair_s = codes // len(us), codes % len(us)
    inv_p = inv_p.reshape(n, k)
    sx, sy = us[pair_s, 0], us[pair_s, 1]
    tol2 = cfg.inlier_tol ** 2
    rng = np.random.default_rng(cfg.seed)

    best = None  # (count, -err, H, inlier mask)
    needed = cfg.max_iterations
    iterations = 0
    draws = 0
    max_draws = 10 * cfg.max_iterations
    while iterations < min(needed, cfg.max_iterations) and draws < max_draws:
        nb = min(batch, max_draws - draws)
        picks = _draw(rng, n, h, nb)
        sm = M[picks].reshape(nb, h * k, 2)
        ss = S[picks].reshape(nb, h * k, 2)
        good = ~(_degenerate_batch(sm) | _degenerate_batch(ss))
        Hs = np.zeros((nb, 3, 3))
        if good.any():
            Hg, okg = _dlt_batch(sm[good], ss[good])
            Hs[good] = Hg
            good[good] = okg
        gi = np.flatnonzero(good)
        if len(gi):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                px, py = _project_batch(Hs[gi], um)
                dx = px[:, pair_m] - sx
                dy = py[:, pair_m] - sy
                d2 = dx * dx + dy * dy
            d2[~np.isfinite(d2)] = np.inf
            inl = d2 <= tol2
            masks = inl[:, inv_p[:, 0]]
            for c in range(1, k):
                masks &= inl[:, inv_p[:, c]]
            counts = np.count_nonzero(masks, axis=1)
        slot = {int(g): j for j, g in enumerate(gi)}
        for b in range(nb):
            if iterations >= min(needed, cfg.max_iterations):
                break
            draws += 1
            if b not in slot:
                continue
            iterations += 1
            j = slot[b]
            count = int(counts[j])
            if best is not None and count < best[0]:
                continue
            mask = masks[j]
            err = float(d2[j][inv_p[mask]].sum()) if count else 0.0
            if best is None or count > best[0] or err < -best[1]:
                best = (count, -err, Hs[b].copy(), mask)
                needed = expected_iterations(cfg.confidence, count / n, h)
    if best is None or best[0] < cfg.min_inlier_graphs:
        return None
    count, _, H, mask = best
    src, dst = M[mask].reshape(-1, 2), S[mask].reshape(-1, 2)
    refinement, used = None, None
    # a rough hypothesis can settle a pairing conflict the wrong way, so
    # re-pair with the refined pose until the pairing is stable
    for _ in range(5):
        arr = one_to_one_pairs(H, src, dst)
        if len(arr) < 4 or (used is not None and np.array_equal(arr, used)):
            break
        used = arr
        refinement = lm_refine(H, src=arr[:, 0], dst=arr[:, 1])
        H = refinement.homography
    return RansacResult(H, [int(i) for i in np.flatnonzero(mask)], iterations, count, refinement)


def ransac_pose(corrs, cfg=None):
    """Pose from keygraph correspondences; each draw takes ``ceil(4 / k)`` of them."""
    corrs = list(corrs)
    if not corrs:
        return None
    k = len(corrs[0].iso)
    M = np.array([[m for m, _ in c.iso] for c in corrs], dtype=np.float64)
    S = np.array([[s for _, s in c.iso] for c in corrs], dtype=np.float64)
    return ransac_groups(M, S, sample_size(k), cfg)


def ransac_points(pairs, cfg=None):
    """Plain keypoint RANSAC (four pairs per draw), the usual baseline."""
    src, dst = _split_pairs(pairs)
    return ransac_groups(src[:, None, :], dst[:, None, :], 4, cfg)


def corner_transfer_error(H_est, H_true, width, height):
    """Largest distance between the image corners mapped by both homographies."""
    corners = np.array([[0, 0], [width - 1, 0], [width - 1, height - 1], [0, height - 1]], dtype=float)
    return float(np.sqrt(((project(H_est, corners) - project(H_true, corners)) ** 2).sum(axis=1)).max())
