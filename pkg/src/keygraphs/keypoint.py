"""Keypoint detection, min-distance sampling and keypoint files."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfBoundsPoint, ParseError
from .image import as_gray

DEFAULT_MIN_DIST = 10


class Source(enum.Enum):
    DETECTED = "detected"
    LOADED = "loaded"


@dataclass
class KeypointSet:
    points: list
    source: Source = Source.DETECTED
    # corner response per point, strongest first when detected; None when loaded
    scores: list | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def as_array(self):
        return np.asarray(self.points, dtype=np.int64).reshape(-1, 2)


def _sobel(a):
    p = np.pad(a, 1, mode="edge")
    # smooth [1, 2, 1] across, difference [-1, 0, 1] along
    mid = p[1:-1, :] + p[1:-1, :]
    sy = p[:-2, :] + mid + p[2:, :]
    gx = sy[:, 2:] - sy[:, :-2]
    mid = p[:, 1:-1] + p[:, 1:-1]
    sx = p[:, :-2] + mid + p[:, 2:]
    gy = sx[2:, :] - sx[:-2, :]
    return gx, gy


def _box5(a):
    p = np.pad(a, 2, mode="edge")
    rows = p[:-4] + p[1:-3] + p[2:-2] + p[3:-1] + p[4:]
    return rows[:, :-4] + rows[:, 1:-3] + rows[:, 2:-2] + rows[:, 3:-1] + rows[:, 4:]


def _max3(a):
    p = np.pad(a, 1, mode="constant", constant_values=-np.inf)
    rows = np.maximum(np.maximum(p[:-2], p[1:-1]), p[2:])
    return np.maximum(np.maximum(rows[:, :-2], rows[:, 1:-1]), rows[:, 2:])


def min_eigen_response(img):
    """Smaller eigenvalue of the 5x5-summed structure tensor at every pixel.

    Gradients are 3x3 Sobel with replicated borders. Computed in float32,
    which is exact for the gradients of 8-bit images.
    """
    a = np.asarray(img, dtype=np.float32)
    gx, gy = _sobel(a)
    sxx = _box5(gx * gx)
    syy = _box5(gy * gy)
    sxy = _box5(gx * gy)
    half_tr = 0.5 * (sxx + syy)
    disc = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy * sxy, 0))
    return np.maximum(half_tr - disc, 0)


def detect_corners(img, max_count=1000, quality=0.01, border=3):
    """Minimum-eigenvalue corners, strongest first.

    A pixel is kept when its response is a 3x3 local maximum and at least
    ``quality`` times the image maximum. Plateaus are thinned greedily so
    no two detections are 8-neighbours. Pixels closer than ``border`` to the
    image edge are ignored.
    """
    a = as_gray(img)
    if not 0 < quality <= 1:
        raise ValueError(f"quality must be in (0, 1], got {quality}")
    resp = min_eigen_response(a)
    h, w = resp.shape
    if border > 0:
        mask = np.zeros_like(resp, dtype=bool)
        mask[border:h - border, border:w - border] = True
        resp = np.where(mask, resp, 0.0)
    peak = resp.max()
    if peak <= 0:
        return KeypointSet([], Source.DETECTED, [])
    # relative slack keeps flat-region round-off out of the candidate set
    thresh = max(quality * peak, peak * 1e-9)
    local_max = _max3(resp)
    ys, xs = np.nonzero((resp >= thresh) & (resp >= local_max))
    scores = resp[ys, xs]
    order = np.lexsort((xs, ys, -scores))  # strongest first, then raster order
    taken = np.zeros((h + 2, w + 2), dtype=bool)
    pts, kept = [], []
    for i in order:
        x, y = int(xs[i]), int(ys[i])
        if taken[y:y + 3, x:x + 3].any():
            continue
        taken[y + 1, x + 1] = True
        pts.append((x, y))
        kept.append(float(scores[i]))
        if len(pts) >= max_count:
            break
    return KeypointSet(pts, Source.DETECTED, kept)


def sample_min_distance(points, min_dist=DEFAULT_MIN_DIST, seed=0):
    """Random maximal subset with pairwise Chebyshev distance >= ``min_dist``.

    Points are visited in a seeded random order and accepted greedily, which
    makes the result maximal: every rejected point is closer than
    ``min_dist`` to an accepted one.
    """
    if min_dist < 1:
        raise ValueError("min_dist must be >= 1")
    src = points.points if isinstance(points, KeypointSet) else list(points)
    scores = points.scores if isinstance(points, KeypointSet) else None
    source = points.source if isinstance(points, KeypointSet) else Source.DETECTED
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(src))
    grid = {}
    keep = []
    for i in perm:
        x, y = src[i]
        cx, cy = x // min_dist, y // min_dist
        ok = True
        for gx in (cx - 1, cx, cx + 1):
            for gy in (cy - 1, cy, cy + 1):
                for (qx, qy) in grid.get((gx, gy), ()):
                    if max(abs(qx - x), abs(qy - y)) < min_dist:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            grid.setdefault((cx, cy), []).append((x, y))
            keep.append(int(i))
    keep.sort()  # preserve the input order among survivors
    return KeypointSet(
        [tuple(src[i]) for i in keep],
        source,
        [scores[i] for i in keep] if scores is not None else None,
    )


_LINE = re.compile(r"-?[0-9]+ -?[0-9]+")


def parse_keypoints(text, shape=None, path=None):
    """Parse the keypoint text format: one ``x y`` pair per LF-terminated line."""
    seen = set()
    pts = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if not _LINE.fullmatch(line):
            raise ParseError(f"expected 'x y', got {line!r}", line=lineno, path=path)
        x, y = (int(v) for v in line.split(" "))
        if shape is not None:
            h, w = shape[:2]
            if not (0 <= x < w and 0 <= y < h):
                raise OutOfBoundsPoint(f"line {lineno}: ({x}, {y}) outside {w}x{h} image")
        if (x, y) not in seen:
            seen.add((x, y))
            pts.append((x, y))
    return KeypointSet(pts, Source.LOADED)


def load_keypoints(path, shape=None):
    with open(path, "r", encoding="ascii", newline="") as fh:
        return parse_keypoints(fh.read(), shape=shape, path=str(path))


def save_keypoints(path, points):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for x, y in points:
            fh.write(f"{int(x)} {int(y)}\n")
