"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
written straight to the terminal even when output is captured.
"""

import math
import time

import numpy as np
import pytest

from conftest import brute_isomorphisms, direct_dft, random_points
from keygraphs.benchmark import DEFAULT_THRESHOLDS, iteration_trials, point_iteration_trials, run_pair
from keygraphs.config import Params
from keygraphs.descriptor import fourier_descriptor
from keygraphs.evaluation import crop_model, precision_at_recall
from keygraphs.geometry import bresenham, chebyshev, delaunay
from keygraphs.keygraph import CIRCUIT3, CIRCUIT4, PAIR2, Keygraph, isomorphisms, keytuples_of
from keygraphs.matching import (SelectionParams, build_model_store, select_correspondences,
                                select_correspondences_naive)
from keygraphs.pipeline import STAGES, process_scene
from keygraphs.pose import RansacConfig, corner_transfer_error, expected_iterations, ransac_pose
from keygraphs.synthetic import (compose_scene, moving_homography, planted_correspondences,
                                 random_homography, textured_image, warp_image)


@pytest.fixture
def report(capsys, request):
    """Print one PASS/FAIL line for the criterion, then enforce it."""

    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return emit


def _random_graph(rng, s):
    vs = random_points(rng, s.k, 0, 500)
    return Keygraph(s, tuple(vs[i] for i in rng.permutation(s.k)))


def test_criterion_01_isomorphism_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    mismatches = 0
    for s in (PAIR2, CIRCUIT3, CIRCUIT4):
        for _ in range(200):
            gm, gs = _random_graph(rng, s), _random_graph(rng, s)
            if {frozenset(i) for i in isomorphisms(gm, gs)} != brute_isomorphisms(gm, gs):
                mismatches += 1
    dt = time.perf_counter() - t0
    report(1, mismatches == 0 and dt < 5.0,
           f"keytuple isomorphisms equal k! brute force on 600 pairs ({mismatches} mismatches, {dt:.2f} s)")


def test_criterion_02_keytuple_counts(report):
    rng = np.random.default_rng(2)
    counts = {s.name: {len(keytuples_of(_random_graph(rng, s))) for _ in range(50)} for s in (PAIR2, CIRCUIT3, CIRCUIT4)}
    ok = counts == {"pair": {1}, "tri": {3}, "quad": {4}}
    report(2, ok, f"keytuples per graph {counts}")


def test_criterion_03_descriptor_invariances(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        f = rng.uniform(0, 255, 30)
        d = fourier_descriptor(f)
        for g in (f + rng.uniform(-100, 100), f * rng.uniform(0.05, 20), 3.5 * f - 40):
            worst = max(worst, float(np.max(np.abs(fourier_descriptor(g).coeffs - d.coeffs))))
    const_invalid = all(not fourier_descriptor(np.full(30, v)).valid for v in (0.0, 17.0, 255.0))
    cosine = np.cos(2 * np.pi * np.arange(30) / 30)
    target = np.array([1.0, 0, 0, 0, 0, 0])
    cos_err = max(float(np.max(np.abs(fourier_descriptor(cosine).coeffs - target))),
                  float(np.max(np.abs(direct_dft(cosine, 3) - target))))
    ok = worst < 1e-9 and const_invalid and cos_err < 1e-9
    report(3, ok, f"offset/contrast change {worst:.2e}, constant invalid={const_invalid}, cosine error {cos_err:.2e}")


def _empty_circumcircle_violations(pts, faces):
    """Exact integer in-circle test of every face against every point."""
    P = np.asarray(pts, dtype=np.int64)
    F = np.asarray(faces, dtype=np.int64)
    a, b, c = P[F[:, 0]], P[F[:, 1]], P[F[:, 2]]
    bad = 0
    for i, d in enumerate(P):
        ax, ay = a[:, 0] - d[0], a[:, 1] - d[1]
        bx, by = b[:, 0] - d[0], b[:, 1] - d[1]
        cx, cy = c[:, 0] - d[0], c[:, 1] - d[1]
        det = ((ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
               + (cx * cx + cy * cy) * (ax * by - bx * ay))
        # faces are clockwise on screen (y down), i.e. counterclockwise in y-up terms
        inside = det > 0
        inside &= ~np.any(F == i, axis=1)
        bad += int(inside.sum())
    return bad


def test_criterion_04_geometry_oracles(report):
    rng = np.random.default_rng(4)
    bad_faces = bad_edges = 0
    for _ in range(1000):
        pts = random_points(rng, int(rng.integers(3, 51)), 0, 1000)
        try:
            tri = delaunay(pts)
        except Exception:
            continue  # all collinear: nothing to check
        bad_faces += _empty_circumcircle_violations(pts, tri.faces)
        bad_edges += len(tri.edges) > 3 * len(pts) - 6
    bad_len = 0
    for p, q in rng.integers(-1000, 1000, (10_000, 2, 2)):
        p, q = tuple(int(v) for v in p), tuple(int(v) for v in q)
        bad_len += len(bresenham(p, q)) != chebyshev(p, q) + 1
    ok = bad_faces == 0 and bad_edges == 0 and bad_len == 0
    report(4, ok, f"1000 triangulations: {bad_faces} circumcircle violations, {bad_edges} edge-bound "
                  f"violations; 10^4 chains: {bad_len} length errors")


def test_criterion_05_join_equivalence(report):
    from test_matching import random_instance

    mismatches = total = 0
    for i in range(100):
        store, sg, sdesc = random_instance(1000 + i, ("pair", "tri", "quad")[i % 3])
        assert len(store.graphs) <= 20 and len(sg) <= 20
        fast = select_correspondences(store, sg, sdesc, SelectionParams(0.5))
        naive = select_correspondences_naive(store, sg, sdesc, SelectionParams(0.5))
        mismatches += fast != naive
        total += len(fast)
    report(5, mismatches == 0, f"join equals naive enumeration on 100 instances "
                               f"({mismatches} mismatches, {total} correspondences)")


def test_criterion_06_planted_pose(report):
    t0 = time.perf_counter()
    good = 0
    for seed in range(100):
        H = random_homography(640, 480, np.random.default_rng(10_000 + seed))
        corrs, _ = planted_correspondences(H, 200, 0.3, "tri", seed=seed)
        res = ransac_pose(corrs, RansacConfig(seed=seed))
        if res is not None and corner_transfer_error(res.homography, H, 640, 480) < 1.0:
            good += 1
    dt = time.perf_counter() - t0
    report(6, good >= 95 and dt < 60, f"planted pose recovered in {good}/100 seeds ({dt:.1f} s)")


def test_criterion_07_iteration_model(report):
    lines, ok = [], True
    for p in (0.3, 0.5):
        graph = iteration_trials(p, "tri", seeds=100)
        point = point_iteration_trials(p, seeds=100)
        mg = float(np.mean([n for n in graph if n is not None]))
        mp = float(np.mean([n for n in point if n is not None]))
        expect = expected_iterations(0.99, p, 2)
        ratio = mg / expect
        ok &= 0.5 <= ratio <= 2.0 and mg < mp and None not in graph
        lines.append(f"p={p}: h=2 mean {mg:.1f} vs formula {expect:.1f} (x{ratio:.2f}), "
                     f"h=4 points {mp:.1f} (formula {expected_iterations(0.99, p, 4):.1f})")
    report(7, ok, "; ".join(lines))


def test_criterion_08_self_match(report):
    good, worst = 0, 0.0
    for seed in range(10):
        img = textured_image(200, 200, n_shapes=14, seed=seed)
        store = build_model_store(img, "tri")
        res = process_scene(store, img, Params(seed=seed))
        err = math.inf if res.pose is None else corner_transfer_error(res.homography, np.eye(3), 200, 200)
        worst = max(worst, err)
        good += err < 0.5
    report(8, good == 10, f"identity recovered within 0.5 px in {good}/10 seeds (worst {worst:.2e} px)")


def _calibration_ms():
    """Time of one 640x480 float64 add, to put the timing on a machine scale."""
    a = np.ones((480, 640))
    t = []
    for _ in range(50):
        t0 = time.perf_counter()
        a + a
        t.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(t))


def test_criterion_09_timing(report):
    model = textured_image(200, 200, n_shapes=14, seed=3)
    store = build_model_store(model, "tri")
    params = Params(seed=0)
    frames = [compose_scene(model, moving_homography(k, (200, 200)), shape=(480, 640), background_seed=100)
              for k in range(10)]
    process_scene(store, frames[0], params)  # warm-up
    results = [process_scene(store, f, params) for f in frames]
    total = np.array([r.total_ms for r in results])
    stages = {s: float(np.mean([r.timings[s] for r in results])) for s in STAGES}
    n_kp = max(len(r.keypoints) for r in results)
    assert n_kp <= 500
    breakdown = ", ".join(f"{s} {v:.0f}" for s, v in stages.items())
    report(9, float(total.mean()) < 100.0,
           f"(soft) mean {total.mean():.0f} ms/frame, p95 {np.percentile(total, 95):.0f} ms, "
           f"<= {n_kp} keypoints [{breakdown}]; 640x480 add takes {_calibration_ms():.2f} ms here; "
           f"reference figure from 2008 hardware: below 30 ms")


@pytest.mark.slow
def test_criterion_10_structure_ordering(report):
    params = {s: Params(structure=s) for s in ("pair", "tri")}
    prec = {"pair": [], "tri": []}
    for i in range(24):
        rng = np.random.default_rng(500 + i)
        base = textured_image(320, 240, n_shapes=40, seed=500 + i)
        H = random_homography(320, 240, rng)
        scene = warp_image(base, H, replicate=True)
        x, y = int(rng.integers(0, 320 - 112)), int(rng.integers(0, 240 - 112))
        model, Hc = crop_model(base, (x, y, 112, 112), H)
        for s in ("pair", "tri"):
            curve = run_pair(model, scene, Hc, s, params[s], DEFAULT_THRESHOLDS).curve
            v = precision_at_recall(curve, 0.8)
            prec[s].append(0.0 if v is None else v)
    tri, pair = np.array(prec["tri"]), np.array(prec["pair"])
    wins, losses = int((tri > pair).sum()), int((tri < pair).sum())
    ok = tri.mean() > pair.mean() and wins > losses
    report(10, ok, f"precision at recall >= 0.8 over 24 fixtures: tri mean {tri.mean():.3f} "
                   f"(median {np.median(tri):.3f}) vs pair {pair.mean():.3f} (median {np.median(pair):.3f}); "
                   f"tri higher in {wins}, lower in {losses}")
