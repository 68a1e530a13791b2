"""Grayscale images as 2-D numpy arrays, plus binary PGM/PPM I/O.

A gray image is any 2-D array indexed ``img[y, x]``. Files are read as
uint8; intermediate results (blurred images) are float64.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyImage, ParseError


def as_gray(img):
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D gray image, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise EmptyImage("image has no pixels")
    return a


def _read_token(data, pos):
    # skip whitespace and comments
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("truncated PNM header")
    return data[start:pos], pos


def decode_pnm(data):
    """Decode binary P5 (gray) or P6 (RGB) bytes into a uint8 gray array.

    RGB is converted to luma with integer BT.601 weights. 16-bit samples are
    rescaled to 8 bits.
    """
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported PNM magic {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise ParseError(f"bad PNM header field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise EmptyImage(f"PNM has size {width}x{height}")
    if not 0 < maxval < 65536:
        raise ParseError(f"bad maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    channels = 1 if magic == b"P5" else 3
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height * channels
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=pos) \
        if len(data) - pos >= count * dtype.itemsize else None
    if raster is None:
        raise ParseError("truncated PNM raster")
    a = raster.astype(np.int64).reshape(height, width, channels)
    if maxval != 255:
        a = (a * 255 + maxval // 2) // maxval
    if channels == 3:
        a = (299 * a[..., 0] + 587 * a[..., 1] + 114 * a[..., 2] + 500) // 1000
    else:
        a = a[..., 0]
    return np.clip(a, 0, 255).astype(np.uint8)


def read_pnm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return decode_pnm(data)
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None


def encode_pgm(img):
    a = as_gray(img)
    a = np.clip(np.rint(a), 0, 255).astype(np.uint8)
    h, w = a.shape
    return b"P5\n%d %d\n255\n" % (w, h) + a.tobytes()


def write_pgm(path, img):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def encode_ppm(rgb):
    a = np.clip(np.rint(np.asarray(rgb)), 0, 255).astype(np.uint8)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("expected an HxWx3 array")
    h, w, _ = a.shape
    return b"P6\n%d %d\n255\n" % (w, h) + a.tobytes()
