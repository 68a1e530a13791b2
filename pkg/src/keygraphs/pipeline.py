"""End-to-end scene processing against a stored model."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import Params
from .descriptor import describe_arcs, gaussian_blur
from .errors import AllCollinear, FewerThanThreePoints, NoPoseFound
from .geometry import delaunay
from .keygraph import extract_scene_keygraphs
from .keypoint import KeypointSet, detect_corners, sample_min_distance
from .matching import SelectionParams, select_correspondences
from .pose import ransac_pose

STAGES = ("blur", "corners", "sample", "triangulate", "extract", "describe", "join", "ransac")


@dataclass
class SceneResult:
    keypoints: list
    graphs: list
    correspondences: list
    pose: object  # RansacResult or None
    timings: dict = field(default_factory=dict)

    @property
    def homography(self):
        return None if self.pose is None else self.pose.homography

    @property
    def total_ms(self):
        return sum(self.timings.values())


class _Timer:
    def __init__(self):
        self.t = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                timer.t[name] = timer.t.get(name, 0.0) + 1e3 * (time.perf_counter() - self.start)

        return _Ctx()


def scene_keypoints(img, params, keypoints=None):
    """Detected (or given) scene keypoints after min-distance sampling."""
    if keypoints is None:
        keypoints = detect_corners(img, params.max_corners, params.quality)
    pts = list(keypoints.points if isinstance(keypoints, KeypointSet) else keypoints)
    pts = sample_min_distance(pts, params.min_dist, params.seed).points
    if params.scene_max_keypoints is not None:
        pts = pts[:params.scene_max_keypoints]
    return pts


def process_scene(store, img, params=None, keypoints=None):
    """Match one scene image against ``store`` and estimate its pose.

    Never raises for a scene without a pose; ``result.pose`` is then None.
    Timings are wall-clock milliseconds per stage.
    """
    params = params or Params(structure=store.structure.name)
    sp = store.params
    profile_len = sp.get("profile_len", params.profile_len)
    coeffs = sp.get("coeffs", params.coeffs)
    sigma = sp.get("blur_sigma", params.blur_sigma)
    tm = _Timer()
    with tm("blur"):
        blurred = gaussian_blur(img, sigma)
    with tm("corners"):
        if keypoints is None:
            keypoints = detect_corners(img, params.max_corners, params.quality)
    with tm("sample"):
        pts = list(keypoints.points if isinstance(keypoints, KeypointSet) else keypoints)
        pts = sample_min_distance(pts, params.min_dist, params.seed).points
        if params.scene_max_keypoints is not None:
            pts = pts[:params.scene_max_keypoints]
    graphs, corrs, pose = [], [], None
    with tm("triangulate"):
        try:
            tri = delaunay(pts)
        except (FewerThanThreePoints, AllCollinear):
            tri = None
    if tri is not None:
        with tm("extract"):
            graphs = extract_scene_keygraphs(tri, store.structure, params.min_dist)
        with tm("describe"):
            arcs = sorted({a for g in graphs for a in g.arcs})
            C, valid = describe_arcs(img, arcs, profile_len, coeffs, blurred=blurred)
            desc = {a: c for a, c, v in zip(arcs, C, valid) if v}
        with tm("join"):
            sel = SelectionParams(params.threshold, params.vertex_threshold, params.index_eps)
            corrs = select_correspondences(store, graphs, desc, sel)
        with tm("ransac"):
            pose = ransac_pose(corrs, params.ransac)
    for s in STAGES:
        tm.t.setdefault(s, 0.0)
    return SceneResult(pts, graphs, corrs, pose, {s: tm.t[s] for s in STAGES})


def estimate_pose(store, img, params=None, keypoints=None):
    """Homography of the model in ``img``; raises NoPoseFound on failure."""
    res = process_scene(store, img, params, keypoints)
    if res.pose is None:
        raise NoPoseFound(f"no pose: {len(res.correspondences)} candidate correspondences")
    return res.pose.homography


def scene_descriptors(img, graphs, params, blurred=None):
    """``{(p, q): coeffs}`` for every arc of ``graphs`` with a valid descriptor."""
    if blurred is None:
        blurred = gaussian_blur(img, params.blur_sigma)
    arcs = sorted({a for g in graphs for a in g.arcs})
    C, valid = describe_arcs(img, arcs, params.profile_len, params.coeffs, blurred=blurred)
    return {a: np.asarray(c) for a, c, v in zip(arcs, C, valid) if v}
