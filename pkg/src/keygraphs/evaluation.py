"""Ground truth, model cropping, recall-precision curves and dataset layout."""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import (DatasetLayoutError, EmptyCandidateSet, ParseError, RectOutOfBounds,
                     SingularMatrix)
from .pose import normalize_homography, project

DEFAULT_TOL = 3.0
CSV_HEADER = ("threshold", "recall", "precision")


def parse_homography(text, path=None):
    """Nine whitespace-separated reals, row-major, as a normalized homography."""
    tokens = text.split()
    if len(tokens) != 9:
        raise ParseError(f"expected 9 numbers, found {len(tokens)}", path=path)
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"not a number: {exc}", path=path) from None
    if not all(np.isfinite(vals)):
        raise ParseError("non-finite homography entry", path=path)
    return normalize_homography(np.array(vals).reshape(3, 3))


def load_homography(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_homography(fh.read(), path=str(path))


def save_homography(path, H):
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(H, dtype=np.float64).reshape(3, 3):
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def crop_model(img, rect, H):
    """Crop ``rect = (x, y, w, h)`` and adjust the model-to-scene homography.

    The returned homography maps crop-local coordinates: it is ``H @ T``
    with ``T`` the translation by the crop offset.
    """
    a = np.asarray(img)
    x, y, w, h = (int(v) for v in rect)
    H_img, W_img = a.shape[:2]
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > W_img or y + h > H_img:
        raise RectOutOfBounds(f"rect {tuple(rect)} outside {W_img}x{H_img} image")
    T = np.array([[1.0, 0.0, x], [0.0, 1.0, y], [0.0, 0.0, 1.0]])
    return a[y:y + h, x:x + w].copy(), normalize_homography(np.asarray(H, dtype=np.float64) @ T)


@dataclass
class GroundTruth:
    H: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(self.H)) or abs(np.linalg.det(self.H)) <= 1e-12 * max(np.abs(self.H).max(), 1e-300) ** 3:
            raise SingularMatrix("ground-truth homography is not invertible")

    def pair_errors(self, model_pts, scene_pts):
        m = np.asarray(model_pts, dtype=np.float64).reshape(-1, 2)
        s = np.asarray(scene_pts, dtype=np.float64).reshape(-1, 2)
        return np.sqrt(((project(self.H, m) - s) ** 2).sum(axis=1))


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    recall: float
    precision: float


def keypoint_pair_correct(pair, gt):
    """True when the model point maps within ``gt.tol`` (strictly) of the scene point."""
    (m, s) = pair
    return bool(gt.pair_errors([m], [s])[0] < gt.tol)


def keygraph_correct(c, gt):
    """True when every implied keypoint pair is correct."""
    pairs = c.keypoint_pairs()
    return bool(np.all(gt.pair_errors([m for m, _ in pairs], [s for _, s in pairs]) < gt.tol))


def implied_pairs(corrs):
    """Union of the keypoint pairs implied by a set of keygraph correspondences."""
    out = set()
    for c in corrs:
        out.update((tuple(m), tuple(s)) for m, s in c.keypoint_pairs())
    return out


def recall_precision_curve(candidates, gt, thresholds):
    """Recall and precision of threshold selection over ``candidates``.

    A candidate is selected at threshold ``t`` when its largest
    dissimilarity is at most ``t``. Precision counts selected keygraph
    correspondences that are correct (1 for an empty selection). Recall
    counts distinct correct keypoint pairs implied by the selection, over
    those implied by the selection at the largest threshold.
    """
    cands = list(candidates)
    if not cands:
        raise EmptyCandidateSet("no candidate correspondences")
    th = [float(t) for t in thresholds]
    if not th:
        raise ValueError("need at least one threshold")
    if any(b < a for a, b in zip(th, th[1:])):
        raise ValueError("thresholds must be sorted ascending")
    score = np.array([c.max_dissimilarity for c in cands])
    good = np.array([keygraph_correct(c, gt) for c in cands])
    # first threshold-level at which each correct keypoint pair appears
    first_seen = {}
    for c, sc in zip(cands, score):
        for m, s in c.keypoint_pairs():
            key = (tuple(m), tuple(s))
            if key not in first_seen or sc < first_seen[key]:
                first_seen[key] = sc
    keys = list(first_seen)
    ok = gt.pair_errors([k[0] for k in keys], [k[1] for k in keys]) < gt.tol if keys else np.zeros(0, bool)
    pair_score = np.array([first_seen[k] for k in keys])[ok] if keys else np.zeros(0)
    total = int((pair_score <= th[-1]).sum())
    out = []
    for t in th:
        sel = score <= t
        n_sel = int(sel.sum())
        precision = float(good[sel].sum()) / n_sel if n_sel else 1.0
        recall = float((pair_score <= t).sum()) / total if total else 0.0
        out.append(CurvePoint(t, recall, precision))
    return out


def precision_at_recall(curve, recall):
    """Best precision among curve points whose recall reaches ``recall`` (None if none do)."""
    vals = [p.precision for p in curve if p.recall >= recall]
    return max(vals) if vals else None


def write_curve_csv(path, curve):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in curve:
            w.writerow([repr(float(p.threshold)), repr(float(p.recall)), repr(float(p.precision))])


def read_curve_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ParseError("missing threshold,recall,precision header", path=str(path))
    out = []
    for i, r in enumerate(rows[1:], start=2):
        try:
            out.append(CurvePoint(*(float(v) for v in r)))
        except (TypeError, ValueError):
            raise ParseError("malformed curve row", line=i, path=str(path)) from None
    return out


def aggregate_curves(curves):
    """Pointwise mean of several curves at the thresholds they all share."""
    curves = [list(c) for c in curves]
    if not curves:
        return []
    shared = set(p.threshold for p in curves[0])
    for c in curves[1:]:
        shared &= {p.threshold for p in c}
    out = []
    for t in sorted(shared):
        pts = [next(p for p in c if p.threshold == t) for c in curves]
        out.append(CurvePoint(t, float(np.mean([p.recall for p in pts])),
                              float(np.mean([p.precision for p in pts]))))
    return out


_IMG = re.compile(r"^img(\d+)\.(pgm|ppm)$")
_HOM = re.compile(r"^H1to(\d+)p?$")


@dataclass
class Dataset:
    root: str
    images: dict  # index -> path
    homographies: dict  # index -> H mapping img1 to img<index>

    @property
    def scenes(self):
        return sorted(k for k in self.images if k != 1)


def load_dataset(root):
    """A directory with ``img1..imgN`` (PGM/PPM) and ``H1to<k>p`` files.

    Every scene ``k >= 2`` needs its homography file.
    """
    if not os.path.isdir(root):
        raise DatasetLayoutError(f"{root} is not a directory")
    images, homs = {}, {}
    for name in sorted(os.listdir(root)):
        m = _IMG.match(name)
        if m:
            k = int(m.group(1))
            if k in images:
                raise DatasetLayoutError(f"two images with index {k} in {root}")
            images[k] = os.path.join(root, name)
            continue
        m = _HOM.match(name)
        if m:
            homs[int(m.group(1))] = os.path.join(root, name)
    if 1 not in images:
        raise DatasetLayoutError(f"{root} has no img1")
    if len(images) < 2:
        raise DatasetLayoutError(f"{root} has no scene images")
    missing = [k for k in images if k != 1 and k not in homs]
    if missing:
        raise DatasetLayoutError(f"{root} lacks H1to{missing[0]}p")
    return Dataset(root, images, {k: load_homography(homs[k]) for k in images if k != 1})


def find_datasets(root):
    """``root`` itself if it is a dataset, otherwise its dataset subdirectories."""
    if any(_IMG.match(n) for n in os.listdir(root)):
        return [load_dataset(root)]
    subs = sorted(os.path.join(root, d) for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if not subs:
        raise DatasetLayoutError(f"no dataset under {root}")
    return [load_dataset(s) for s in subs]
