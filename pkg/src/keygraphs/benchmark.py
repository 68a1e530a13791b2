"""Experiment drivers: recall-precision runs and RANSAC iteration studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Params
from .errors import EmptyCandidateSet, EmptyModel
from .evaluation import GroundTruth, crop_model, implied_pairs, recall_precision_curve
from .geometry import delaunay
from .keygraph import extract_scene_keygraphs, get_structure
from .matching import SelectionParams, build_model_store, select_correspondences
from .pipeline import scene_descriptors, scene_keypoints
from .pose import RansacConfig, ransac_groups, ransac_points, ransac_pose, sample_size
from .synthetic import planted_correspondences

DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(1, 17))  # 0.05 .. 0.80


@dataclass
class PairRun:
    structure: str
    curve: list
    candidates: int
    keygraph_iterations: int | None = None
    point_iterations: int | None = None
    stats: dict = field(default_factory=dict)


def random_crop(shape, size, rng):
    """A ``(x, y, w, h)`` rectangle of ``size`` inside an image of ``shape``."""
    h, w = shape[:2]
    cw, ch = min(size[0], w), min(size[1], h)
    return (int(rng.integers(0, w - cw + 1)), int(rng.integers(0, h - ch + 1)), cw, ch)


def candidate_set(store, scene_img, params, threshold):
    """Scene graphs and every correspondence within ``threshold``."""
    pts = scene_keypoints(scene_img, params)
    try:
        tri = delaunay(pts)
    except ValueError:
        return [], []
    graphs = extract_scene_keygraphs(tri, store.structure, params.min_dist)
    desc = scene_descriptors(scene_img, graphs, params)
    corrs = select_correspondences(store, graphs, desc, SelectionParams(threshold, None, params.index_eps))
    return graphs, corrs


def run_pair(model_img, scene_img, H, structure, params=None, thresholds=DEFAULT_THRESHOLDS,
             log_iterations=False):
    """Recall-precision curve of one model/scene pair (``H`` maps model to scene).

    With ``log_iterations`` the keygraph RANSAC and a four-point baseline
    over the implied keypoint pairs are also run at ``params.threshold``.
    Raises ``EmptyModel`` or ``EmptyCandidateSet`` when there is nothing to
    evaluate.
    """
    s = get_structure(structure)
    params = params or Params(structure=s.name)
    store = build_model_store(model_img, s, params)
    _, corrs = candidate_set(store, scene_img, params, max(thresholds))
    gt = GroundTruth(H)
    curve = recall_precision_curve(corrs, gt, thresholds)
    run = PairRun(s.name, curve, len(corrs))
    if log_iterations:
        sel = [c for c in corrs if c.max_dissimilarity <= params.threshold]
        res = ransac_pose(sel, params.ransac) if sel else None
        run.keygraph_iterations = None if res is None else res.iterations
        pairs = sorted(implied_pairs(sel))
        if len(pairs) >= 4:
            res = ransac_points(pairs, params.ransac)
            run.point_iterations = None if res is None else res.iterations
    return run


def run_dataset(dataset, structure, params=None, thresholds=DEFAULT_THRESHOLDS, crops=1,
                crop_size=(128, 128), seed=0, log_iterations=True):
    """Curves for every (cropped model, scene) pair of a dataset."""
    from .image import read_pnm

    rng = np.random.default_rng(seed)
    base = read_pnm(dataset.images[1])
    runs = []
    for c in range(crops):
        rect = random_crop(base.shape, crop_size, rng)
        for k in dataset.scenes:
            model, Hc = crop_model(base, rect, dataset.homographies[k])
            try:
                run = run_pair(model, read_pnm(dataset.images[k]), Hc, structure, params, thresholds,
                               log_iterations)
            except (EmptyModel, EmptyCandidateSet):
                continue
            run.stats = {"crop": c, "rect": rect, "scene": k}
            runs.append(run)
    return runs


def iteration_trials(p, structure="tri", seeds=100, n=200, cfg=None):
    """RANSAC iteration counts on planted fixtures with inlier ratio ``p``."""
    base = cfg or RansacConfig()
    out = []
    for seed in range(seeds):
        rng = np.random.default_rng(10_000 + seed)
        H = _mild_homography(rng)
        corrs, _ = planted_correspondences(H, n, p, structure, seed=seed)
        res = ransac_pose(corrs, RansacConfig(base.confidence, base.inlier_tol, base.max_iterations,
                                              base.min_inlier_graphs, seed))
        out.append(None if res is None else res.iterations)
    return out


def point_iteration_trials(p, seeds=100, n=200, cfg=None):
    """The four-point baseline at the same inlier ratio."""
    base = cfg or RansacConfig()
    out = []
    for seed in range(seeds):
        rng = np.random.default_rng(10_000 + seed)
        H = _mild_homography(rng)
        corrs, _ = planted_correspondences(H, n, p, "pair", seed=seed)
        # one point per correspondence keeps the point inlier ratio at p
        M = np.array([[c.iso[0][0]] for c in corrs])
        S = np.array([[c.iso[0][1]] for c in corrs])
        res = ransac_groups(M, S, 4, RansacConfig(base.confidence, base.inlier_tol, base.max_iterations,
                                                 base.min_inlier_graphs, seed))
        out.append(None if res is None else res.iterations)
    return out


def _mild_homography(rng):
    from .synthetic import random_homography

    return random_homography(640, 480, rng)


__all__ = ["DEFAULT_THRESHOLDS", "PairRun", "candidate_set", "iteration_trials",
           "point_iteration_trials", "random_crop", "run_dataset", "run_pair", "sample_size"]
