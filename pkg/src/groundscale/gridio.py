"""File formats for grids and images.

Float grids (depth, priors, attention) travel as grayscale PFM: 'Pf' magic,
IEEE-754 single precision, little-endian (negative scale header), bottom-up
scanline order. Zero encodes an invalid pixel; every valid depth in this
package is strictly positive, so nothing is lost. Images travel as binary
PPM (P6) with maxval 255.

All writes go to a temporary file in the destination directory and are
renamed into place, so a failed run never leaves a partial file. Parse
errors name the byte offset at which the problem sits.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import GridParseError
from .grids import ScalarGrid


def _atomic_write(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj) -> None:
    """Serialize a report/config dict to JSON, atomically."""
    _atomic_write(path, (json.dumps(obj, indent=2) + "\n").encode())


def read_json(path: str):
    with open(path) as f:
        return json.load(f)


def _next_token(buf: bytes, pos: int, allow_comments: bool = False):
    """Scan the next whitespace-delimited header token; returns
    (token, token_start, position_after)."""
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if allow_comments and c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise GridParseError("unexpected end of file in header", offset=pos)
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], start, pos


def _parse_int(token: bytes, offset: int, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise GridParseError(f"{what} is not an integer: {token!r}",
                             offset=offset) from None
    if value <= 0:
        raise GridParseError(f"{what} must be positive, got {value}",
                             offset=offset)
    return value


def write_pfm(path: str, grid) -> None:
    """Write a grid as grayscale little-endian PFM (scale -1.0).

    Accepts a ScalarGrid (invalid pixels stored as 0) or a plain 2-D array.
    Values are stored in single precision; rows are written bottom-up per
    the format's convention.
    """
    if isinstance(grid, ScalarGrid):
        values = grid.masked(0.0)
    else:
        values = np.asarray(grid, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"PFM grids must be 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("PFM grids must be finite")
    h, w = values.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode()
    data = np.flipud(values).astype("<f4").tobytes()
    _atomic_write(path, header + data)


def read_pfm(path: str) -> ScalarGrid:
    """Read a grayscale little-endian PFM; zeros become invalid pixels.

    Rejects color ('PF') files and big-endian data (positive scale). The
    scale's magnitude is ignored: this package always writes -1.0.
    """
    with open(path, "rb") as f:
        buf = f.read()
    magic, mstart, pos = _next_token(buf, 0)
    if magic == b"PF":
        raise GridParseError("color PFM ('PF') not supported, need grayscale 'Pf'",
                             offset=mstart)
    if magic != b"Pf":
        raise GridParseError(f"not a PFM file (magic {magic!r})", offset=mstart)
    wtok, wstart, pos = _next_token(buf, pos)
    width = _parse_int(wtok, wstart, "width")
    htok, hstart, pos = _next_token(buf, pos)
    height = _parse_int(htok, hstart, "height")
    stok, sstart, pos = _next_token(buf, pos)
    try:
        scale = float(stok)
    except ValueError:
        raise GridParseError(f"scale is not a number: {stok!r}",
                             offset=sstart) from None
    if scale >= 0.0:
        raise GridParseError(
            "non-negative scale means big-endian data, which is not supported",
            offset=sstart)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise GridParseError("expected single whitespace after scale", offset=pos)
    data_start = pos + 1
    need = width * height * 4
    avail = len(buf) - data_start
    if avail < need:
        raise GridParseError(
            f"expected {need} bytes of pixel data, found {avail}",
            offset=data_start)
    if avail > need:
        raise GridParseError(f"{avail - need} trailing bytes after pixel data",
                             offset=data_start + need)
    flat = np.frombuffer(buf, dtype="<f4", count=width * height, offset=data_start)
    values = np.flipud(flat.reshape(height, width)).astype(np.float64)
    valid = np.isfinite(values) & (values != 0.0)
    return ScalarGrid(np.where(valid, values, 0.0), valid)


def write_ppm(path: str, image: np.ndarray) -> None:
    """Write an image in [0, 1] as binary PPM (P6, maxval 255).

    Grayscale input (H x W) is replicated across the three channels.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.stack([img, img, img], axis=-1)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"image must be H x W or H x W x 3, got {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must be finite and in [0, 1]")
    h, w = img.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode()
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8).tobytes()
    _atomic_write(path, header + data)


def read_ppm(path: str) -> np.ndarray:
    """Read a binary PPM (P6, maxval 255) into an H x W x 3 array in [0, 1]."""
    with open(path, "rb") as f:
        buf = f.read()
    magic, mstart, pos = _next_token(buf, 0, allow_comments=True)
    if magic != b"P6":
        raise GridParseError(f"not a binary PPM (magic {magic!r})", offset=mstart)
    wtok, wstart, pos = _next_token(buf, pos, allow_comments=True)
    width = _parse_int(wtok, wstart, "width")
    htok, hstart, pos = _next_token(buf, pos, allow_comments=True)
    height = _parse_int(htok, hstart, "height")
    mtok, mstart2, pos = _next_token(buf, pos, allow_comments=True)
    maxval = _parse_int(mtok, mstart2, "maxval")
    if maxval != 255:
        raise GridParseError(f"only maxval 255 is supported, got {maxval}",
                             offset=mstart2)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise GridParseError("expected single whitespace after maxval", offset=pos)
    data_start = pos + 1
    need = width * height * 3
    avail = len(buf) - data_start
    if avail < need:
        raise GridParseError(
            f"expected {need} bytes of pixel data, found {avail}",
            offset=data_start)
    if avail > need:
        raise GridParseError(f"{avail - need} trailing bytes after pixel data",
                             offset=data_start + need)
    flat = np.frombuffer(buf, dtype=np.uint8, count=need, offset=data_start)
    return flat.reshape(height, width, 3).astype(np.float64) / 255.0


def to_gray(image: np.ndarray) -> np.ndarray:
    """Channel mean of an H x W x 3 image (identity for 2-D input)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img.mean(axis=2)
    raise ValueError(f"image must be H x W or H x W x 3, got {img.shape}")
