"""Synthetic images, warps and fixtures with known ground truth."""

from __future__ import annotations

import os

import numpy as np

from .image import write_pgm
from .keygraph import KeygraphCorrespondence, get_structure
from .pose import normalize_homography, project


def textured_image(width=320, height=240, n_shapes=40, seed=0, noise=0.0):
    """Random rotated, anti-aliased rectangles over a smooth gradient.

    The shapes give plenty of corners and arcs with varied intensity
    profiles. Returns a uint8 array of shape ``(height, width)``.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = 60 + 40 * (xx / width) + 30 * (yy / height)
    for _ in range(n_shapes):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        hw, hh = rng.uniform(6, 40), rng.uniform(6, 40)
        ang = rng.uniform(0, np.pi)
        c, s = np.cos(ang), np.sin(ang)
        u = (xx - cx) * c + (yy - cy) * s
        v = -(xx - cx) * s + (yy - cy) * c
        # coverage from the signed distance gives anti-aliased edges
        alpha = np.clip(0.5 - np.maximum(np.abs(u) - hw, np.abs(v) - hh), 0.0, 1.0)
        img = (1 - alpha) * img + alpha * rng.uniform(0, 255)
    if noise > 0:
        img = img + rng.normal(0, noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def warp_image(img, H, shape=None, fill=0.0, replicate=False):
    """Warp ``img`` by ``H`` (source -> destination) with bilinear sampling.

    Pixels that map outside the source get ``fill``, or the nearest edge
    value when ``replicate`` is set (which avoids spurious border corners).
    """
    a = np.asarray(img, dtype=np.float64)
    h, w = shape if shape is not None else a.shape
    Hinv = np.linalg.inv(np.asarray(H, dtype=np.float64))
    yy, xx = np.mgrid[0:h, 0:w]
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.float64)
    src = project(Hinv, pts)
    sx, sy = src[:, 0], src[:, 1]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    sh, sw = a.shape
    if replicate:
        sx = np.clip(sx, 0, sw - 1)
        sy = np.clip(sy, 0, sh - 1)
        x0 = np.minimum(np.floor(sx).astype(np.int64), sw - 2)
        y0 = np.minimum(np.floor(sy).astype(np.int64), sh - 2)
    fx, fy = sx - x0, sy - y0
    ok = (x0 >= 0) & (y0 >= 0) & (x0 + 1 < sw) & (y0 + 1 < sh)
    x0c = np.clip(x0, 0, sw - 2)
    y0c = np.clip(y0, 0, sh - 2)
    v = ((1 - fx) * (1 - fy) * a[y0c, x0c] + fx * (1 - fy) * a[y0c, x0c + 1]
         + (1 - fx) * fy * a[y0c + 1, x0c] + fx * fy * a[y0c + 1, x0c + 1])
    v = (v if replicate else np.where(ok, v, fill)).reshape(h, w)
    return np.clip(np.rint(v), 0, 255).astype(np.uint8)


def random_homography(width, height, rng, shift=0.1, perspective=1e-4, rotation=0.2, scale=(0.9, 1.1)):
    """A moderate random homography centred on the image."""
    cx, cy = width / 2, height / 2
    ang = rng.uniform(-rotation, rotation)
    sc = rng.uniform(*scale)
    c, s = np.cos(ang) * sc, np.sin(ang) * sc
    A = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    T0 = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=float)
    T1 = np.array([[1, 0, cx + rng.uniform(-shift, shift) * width],
                   [0, 1, cy + rng.uniform(-shift, shift) * height], [0, 0, 1]])
    P = np.eye(3)
    P[2, :2] = rng.uniform(-perspective, perspective, 2)
    return normalize_homography(T1 @ P @ A @ T0)


def planted_correspondences(H, n, inlier_ratio, structure="tri", width=640, height=480,
                            spread=40, noise=0.0, seed=0):
    """Keygraph correspondences of which a fraction follows ``H`` exactly.

    Inliers map model vertices through ``H`` (plus optional Gaussian
    noise); outliers get unrelated scene vertices. Returns the
    correspondence list and the set of inlier indices.
    """
    s = get_structure(structure)
    rng = np.random.default_rng(seed)
    n_in = int(round(inlier_ratio * n))
    idx = rng.permutation(n)
    inliers = set(int(i) for i in idx[:n_in])
    out = []
    for i in range(n):
        base = rng.uniform([spread, spread], [width - spread, height - spread])
        model = base + rng.uniform(-spread, spread, (s.k, 2))
        if i in inliers:
            scene = project(H, model) + (rng.normal(0, noise, model.shape) if noise else 0)
        else:
            scene = rng.uniform([0, 0], [width, height], (s.k, 2))
        mv = tuple(tuple(float(v) for v in p) for p in model)
        sv = tuple(tuple(float(v) for v in p) for p in scene)
        out.append(KeygraphCorrespondence(model=None, scene=None, iso=tuple(zip(mv, sv)),
                                          dissimilarities=(), model_id=i, scene_id=i, rotation=0))
    return out, inliers


def write_dataset(root, n_frames=3, width=320, height=240, seed=0, n_shapes=40):
    """A benchmark directory: ``img1.pgm .. imgN.pgm`` plus ``H1to{k}p`` files."""
    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(seed)
    base = textured_image(width, height, n_shapes=n_shapes, seed=seed)
    write_pgm(os.path.join(root, "img1.pgm"), base)
    hs = []
    for k in range(2, n_frames + 1):
        H = random_homography(width, height, rng)
        write_pgm(os.path.join(root, f"img{k}.pgm"), warp_image(base, H))
        with open(os.path.join(root, f"H1to{k}p"), "w") as fh:
            for row in H:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        hs.append(H)
    return hs


def moving_homography(k, size, start=(200, 140), step=(15, 8), spin=0.03, tilt=1e-4):
    """Pose of frame ``k`` of a scripted motion: drift, slow spin, mild perspective wobble."""
    w, h = size
    a = spin * k
    c, s = np.cos(a), np.sin(a)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    P = np.eye(3)
    P[2, 0] = tilt * np.sin(k)
    C = np.array([[1, 0, -w / 2], [0, 1, -h / 2], [0, 0, 1.0]])
    T = np.array([[1, 0, start[0] + step[0] * k], [0, 1, start[1] + step[1] * k], [0, 0, 1.0]])
    return normalize_homography(T @ P @ R @ C)


def write_frames(root, model, n_frames=10, shape=(480, 640), background_seed=100, n_shapes=10):
    """A tracking sequence ``frame0000.pgm ...``: the model moving over a fixed background.

    Returns the model-to-frame homography of every frame.
    """
    os.makedirs(root, exist_ok=True)
    size = (np.shape(model)[1], np.shape(model)[0])
    hs = []
    for k in range(n_frames):
        H = moving_homography(k, size)
        img = compose_scene(model, H, shape=shape, background_seed=background_seed, n_shapes=n_shapes)
        write_pgm(os.path.join(root, f"frame{k:04d}.pgm"), img)
        hs.append(H)
    return hs


def compose_scene(model, H, shape=(480, 640), background_seed=1, n_shapes=60, noise=0.0):
    """Paste ``model`` warped by ``H`` over a textured background of ``shape``."""
    h, w = shape
    bg = textured_image(w, h, n_shapes=n_shapes, seed=background_seed).astype(np.float64)
    ones = np.full(np.shape(model), 255, dtype=np.uint8)
    mask = warp_image(ones, H, shape=shape) >= 255
    out = np.where(mask, warp_image(model, H, shape=shape), bg)
    if noise > 0:
        out = out + np.random.default_rng(background_seed).normal(0, noise, out.shape)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def add_distractors(img, n, seed=0, size=(6, 12), margin=4):
    """Draw ``n`` small solid squares (each adds up to four corners) at random."""
    out = np.asarray(img).copy()
    h, w = out.shape
    rng = np.random.default_rng(seed)
    for _ in range(n):
        s = int(rng.integers(size[0], size[1] + 1))
        x = int(rng.integers(margin, w - margin - s))
        y = int(rng.integers(margin, h - margin - s))
        out[y:y + s, x:x + s] = 255 if out[y:y + s, x:x + s].mean() < 128 else 0
    return out
