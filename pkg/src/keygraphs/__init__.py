"""Keygraph-based planar object detection.

Small isomorphic graphs of keypoints are extracted from a model and a
scene, their arcs described by Fourier coefficients of intensity
profiles, matched through keytuples and fed as whole-graph samples to
RANSAC for homography estimation.
"""

from .config import Params
from .descriptor import ArcDescriptor, describe_arcs, fourier_descriptor, gaussian_blur, intensity_profile
from .errors import KeygraphError, NoPoseFound
from .evaluation import GroundTruth, crop_model, load_homography, recall_precision_curve
from .geometry import bresenham, chebyshev, delaunay
from .image import read_pnm, write_pgm
from .keygraph import (CIRCUIT3, CIRCUIT4, PAIR2, Keygraph, KeygraphCorrespondence,
                       enumerate_model_keygraphs, extract_scene_keygraphs, get_structure,
                       isomorphisms, keytuples_of)
from .keypoint import KeypointSet, detect_corners, load_keypoints, sample_min_distance
from .matching import ModelStore, SelectionParams, build_model_store, select_correspondences
from .pipeline import SceneResult, estimate_pose, process_scene
from .pose import RansacConfig, expected_iterations, homography_dlt, lm_refine, ransac_pose

__version__ = "0.1.0"

__all__ = [
    "ArcDescriptor", "CIRCUIT3", "CIRCUIT4", "GroundTruth", "Keygraph", "KeygraphCorrespondence",
    "KeygraphError", "KeypointSet", "ModelStore", "NoPoseFound", "PAIR2", "Params", "RansacConfig",
    "SceneResult", "SelectionParams", "bresenham", "build_model_store", "chebyshev", "crop_model",
    "delaunay", "describe_arcs", "detect_corners", "enumerate_model_keygraphs", "estimate_pose",
    "expected_iterations", "extract_scene_keygraphs", "fourier_descriptor", "gaussian_blur",
    "get_structure", "homography_dlt", "intensity_profile", "isomorphisms", "keytuples_of",
    "lm_refine", "load_homography", "load_keypoints", "process_scene", "ransac_pose", "read_pnm",
    "recall_precision_curve", "sample_min_distance", "select_correspondences", "write_pgm",
]
