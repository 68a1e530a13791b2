"""Intensity profiles along arcs and their Fourier descriptors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateArc, InvalidDescriptor
from .image import as_gray

DEFAULT_PROFILE_LEN = 30
DEFAULT_COEFFS = 3
DEFAULT_BLUR_SIGMA = 1.0
DEFAULT_BLUR_RADIUS = 2
# below this pre-normalization norm a profile counts as constant
DEGENERATE_NORM = 1e-6


@dataclass
class ArcDescriptor:
    coeffs: np.ndarray
    valid: bool = True

    def __eq__(self, other):
        if not isinstance(other, ArcDescriptor):
            return NotImplemented
        return self.valid == other.valid and np.array_equal(self.coeffs, other.coeffs)


def gaussian_kernel(sigma, radius):
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma=DEFAULT_BLUR_SIGMA, radius=DEFAULT_BLUR_RADIUS):
    """Separable Gaussian blur with replicated borders; returns float64."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a = np.asarray(as_gray(img), dtype=np.float64)
    k = gaussian_kernel(sigma, radius)
    r = radius
    p = np.pad(a, ((r, r), (0, 0)), mode="edge")
    h, w = a.shape
    rows = k[0] * p[0:h]
    for i in range(1, 2 * r + 1):
        rows += k[i] * p[i:i + h]
    p = np.pad(rows, ((0, 0), (r, r)), mode="edge")
    out = k[0] * p[:, 0:w]
    for i in range(1, 2 * r + 1):
        out += k[i] * p[:, i:i + w]
    return out


def _chain_coords(sx, sy, dx, dy, length, i):
    """Closed-form Bresenham pixel ``i`` of chains starting at ``(sx, sy)``.

    ``dx, dy`` are the signed deltas to the far endpoint and ``length`` the
    Chebyshev length. Matches :func:`keygraphs.geometry.bresenham` traced
    from the lexicographically smaller endpoint.
    """
    adx, ady = np.abs(dx), np.abs(dy)
    xmajor = adx >= ady
    major = np.where(xmajor, adx, ady)
    minor = np.where(xmajor, ady, adx)
    # ties round toward the nearer endpoint, as in bresenham()
    step = (2 * i * minor + major - 1 + (2 * i > major)) // (2 * major)
    along = i
    x = np.where(xmajor, sx + np.sign(dx) * along, sx + np.sign(dx) * step)
    y = np.where(xmajor, sy + np.sign(dy) * step, sy + np.sign(dy) * along)
    return x, y, xmajor


def arc_profiles(img, starts, ends, length=DEFAULT_PROFILE_LEN):
    """Mean of three parallel Bresenham profiles per arc, resampled to ``length``.

    ``img`` should already be blurred. The side chains are the centre chain
    shifted by one pixel across its dominant axis, each pixel clamped to the
    image. Returns an ``(n_arcs, length)`` float64 array.
    """
    a = np.asarray(img)
    h, w = a.shape
    starts = np.asarray(starts, dtype=np.int64).reshape(-1, 2)
    ends = np.asarray(ends, dtype=np.int64).reshape(-1, 2)
    if len(starts) == 0:
        return np.zeros((0, length))
    # trace from the lexicographically smaller endpoint, reverse afterwards
    rev = (ends[:, 0] < starts[:, 0]) | ((ends[:, 0] == starts[:, 0]) & (ends[:, 1] < starts[:, 1]))
    s = np.where(rev[:, None], ends, starts)
    e = np.where(rev[:, None], starts, ends)
    dx = (e[:, 0] - s[:, 0])[:, None]
    dy = (e[:, 1] - s[:, 1])[:, None]
    cheb = np.maximum(np.abs(dx), np.abs(dy))
    if np.any(cheb == 0):
        raise DegenerateArc("arc endpoints coincide")
    j = np.arange(length, dtype=np.int64)[None, :]
    num = j * cheb
    i0 = num // (length - 1)
    frac = (num % (length - 1)) / (length - 1)
    i1 = np.minimum(i0 + 1, cheb)
    sx, sy = s[:, 0:1], s[:, 1:2]

    def sample(i):
        x, y, xmajor = _chain_coords(sx, sy, dx, dy, cheb, i)
        xmajor = np.broadcast_to(xmajor, x.shape)
        acc = np.zeros(x.shape)
        for off in (-1, 0, 1):
            xx = np.clip(np.where(xmajor, x, x + off), 0, w - 1)
            yy = np.clip(np.where(xmajor, y + off, y), 0, h - 1)
            acc += a[yy, xx]
        return acc / 3.0

    prof = (1.0 - frac) * sample(i0) + frac * sample(i1)
    prof[rev] = prof[rev, ::-1]
    return prof


def intensity_profile(img, p, q, length=DEFAULT_PROFILE_LEN):
    """Profile of the single arc ``p -> q``; see :func:`arc_profiles`."""
    if tuple(p) == tuple(q):
        raise DegenerateArc(f"arc from {tuple(p)} to itself")
    return arc_profiles(img, [p], [q], length)[0]


def dft_basis(length, m):
    y = np.arange(length)
    x = np.arange(1, m + 1)
    return np.exp(-2j * np.pi * np.outer(y, x) / length)


def fourier_descriptors(profiles, m=DEFAULT_COEFFS):
    """Vectorized descriptors: returns ``(coeffs, valid)`` for each row.

    ``coeffs`` interleaves real and imaginary parts of F(1..m), scaled to
    unit norm. Rows whose raw norm is below ``DEGENERATE_NORM`` are invalid
    and left at zero.
    """
    prof = np.asarray(profiles, dtype=np.float64)
    if prof.ndim == 1:
        prof = prof[None, :]
    length = prof.shape[1]
    if not 1 <= m < length / 2:
        raise ValueError(f"need 1 <= m < l/2, got m={m}, l={length}")
    basis = dft_basis(length, m)
    # accumulate sample by sample so a row's result never depends on the batch
    re = np.zeros((len(prof), m))
    im = np.zeros((len(prof), m))
    for y in range(length):
        re += prof[:, y:y + 1] * basis[y].real
        im += prof[:, y:y + 1] * basis[y].imag
    raw = np.empty((len(prof), 2 * m))
    raw[:, 0::2] = re
    raw[:, 1::2] = im
    norm = np.sqrt(np.sum(raw * raw, axis=1))
    valid = norm >= DEGENERATE_NORM
    out = np.zeros_like(raw)
    out[valid] = raw[valid] / norm[valid, None]
    return out, valid


def fourier_descriptor(profile, m=DEFAULT_COEFFS):
    coeffs, valid = fourier_descriptors(np.asarray(profile, dtype=np.float64)[None, :], m)
    return ArcDescriptor(coeffs[0], bool(valid[0]))


def arc_dissimilarity(d1, d2):
    if not (d1.valid and d2.valid):
        raise InvalidDescriptor("cannot compare an invalid descriptor")
    diff = np.asarray(d1.coeffs) - np.asarray(d2.coeffs)
    return float(np.sqrt(np.dot(diff, diff)))


def describe_arcs(img, arcs, length=DEFAULT_PROFILE_LEN, m=DEFAULT_COEFFS, blurred=None):
    """Descriptors for ``arcs`` (``(p, q)`` pairs) on an image.

    ``blurred`` may carry a precomputed :func:`gaussian_blur` of ``img``.
    Returns ``(coeffs, valid)`` arrays aligned with ``arcs``.
    """
    if blurred is None:
        blurred = gaussian_blur(img)
    arcs = list(arcs)
    if not arcs:
        return np.zeros((0, 2 * m)), np.zeros(0, dtype=bool)
    arr = np.asarray(arcs, dtype=np.int64).reshape(-1, 2, 2)
    prof = arc_profiles(blurred, arr[:, 0], arr[:, 1], length)
    return fourier_descriptors(prof, m)


def format_descriptor_dump(arcs, coeffs):
    """Text dump, one arc per line: ``x1 y1 x2 y2`` then coefficients."""
    lines = []
    for (p, q), c in zip(arcs, coeffs):
        vals = " ".join(f"{v:.9g}" for v in c)
        lines.append(f"{p[0]} {p[1]} {q[0]} {q[1]} {vals}")
    return "\n".join(lines) + ("\n" if lines else "")
