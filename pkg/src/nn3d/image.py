"""Single-channel image ("plane") representation and file I/O.

A plane is a 2-D float64 numpy array in row-major order, nominally in
[0, 255]. Planes are treated as immutable values: every public operation
returns a new array and never mutates its input.

Supported file formats:

* binary PGM (P5, maxval <= 255), 8-bit grayscale
* PNG, 8-bit grayscale only (color and 16-bit inputs are rejected)
* the NN3D plane format ".npf": magic "NN3DPF01", little-endian u32
  width, u32 height, then width*height IEEE-754 binary32 samples in
  row-major order. No padding, no checksum.
"""

import os

import numpy as np

from .errors import DimensionError, FormatError

PLANE_MAGIC = b"NN3DPF01"


def as_plane(data) -> np.ndarray:
    """Validate and return `data` as a float64 plane (2-D, finite)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"plane must be 2-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("plane contains non-finite samples")
    return arr


def load_plane(path) -> np.ndarray:
    """Load a plane from a PGM, PNG, or .npf file.

    8-bit integer inputs map value v to float v; .npf files are read
    bit-exactly (binary32 widened to float64).
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if head.startswith(PLANE_MAGIC):
        return _load_npf(path)
    if head.startswith(b"P5"):
        return _load_pgm(path)
    if head.startswith(b"\x89PNG"):
        return _load_png(path)
    raise FormatError(f"unsupported image format: {path}")


def save_plane(plane, path, format=None) -> None:
    """Write `plane` to `path` as `format` ("pgm8" or "plane").

    When `format` is None it is inferred from the extension (.pgm or
    .npf). pgm8 clamps samples to [0, 255] and rounds half away from
    zero; the plane format preserves binary32 samples bit-exactly.
    """
    arr = as_plane(plane)
    path = os.fspath(path)
    if format is None:
        ext = os.path.splitext(path)[1].lower()
        format = {".pgm": "pgm8", ".npf": "plane"}.get(ext)
        if format is None:
            raise FormatError(f"cannot infer output format from extension: {path}")
    if format == "pgm8":
        _save_pgm(arr, path)
    elif format == "plane":
        _save_npf(arr, path)
    else:
        raise FormatError(f"unknown save format: {format!r}")


def quantize_u8(plane) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero to uint8."""
    clamped = np.clip(plane, 0.0, 255.0)
    return np.floor(clamped + 0.5).astype(np.uint8)


def extract_block(plane, coord, n1: int) -> np.ndarray:
    """Return the n1 x n1 window whose top-left corner is at `coord`."""
    arr = np.asarray(plane)
    row, col = int(coord[0]), int(coord[1])
    h, w = arr.shape
    if row < 0 or col < 0 or row + n1 > h or col + n1 > w:
        raise DimensionError(
            f"block ({row},{col}) size {n1} out of bounds for {h}x{w} plane"
        )
    return arr[row : row + n1, col : col + n1].copy()


def _load_npf(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16:
        raise FormatError(f"{path}: truncated plane header")
    w, h = np.frombuffer(buf, dtype="<u4", count=2, offset=8)
    w, h = int(w), int(h)
    if w < 1 or h < 1:
        raise FormatError(f"{path}: invalid dimensions {w}x{h}")
    expected = 16 + 4 * w * h
    if len(buf) != expected:
        raise FormatError(
            f"{path}: payload size {len(buf) - 16} inconsistent with {w}x{h} header"
        )
    data = np.frombuffer(buf, dtype="<f4", count=w * h, offset=16)
    plane = data.astype(np.float64).reshape(h, w)
    if not np.all(np.isfinite(plane)):
        raise FormatError(f"{path}: plane contains non-finite samples")
    return plane


def _save_npf(arr, path):
    h, w = arr.shape
    header = PLANE_MAGIC + np.array([w, h], dtype="<u4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.astype("<f4").tobytes())
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


def _pgm_tokens(buf):
    # yields whitespace-separated header tokens, skipping '#' comments
    i = 0
    while i < len(buf):
        ch = buf[i : i + 1]
        if ch.isspace():
            i += 1
        elif ch == b"#":
            while i < len(buf) and buf[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < len(buf) and not buf[j : j + 1].isspace():
                j += 1
            yield buf[i:j], j
            i = j


def _load_pgm(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    fields = []
    end = 0
    for tok, pos in _pgm_tokens(buf):
        fields.append(tok)
        end = pos
        if len(fields) == 4:
            break
    if len(fields) < 4 or fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    try:
        w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if w < 1 or h < 1 or not (1 <= maxval <= 255):
        raise FormatError(f"{path}: unsupported PGM geometry/maxval")
    payload = buf[end + 1 :]
    if len(payload) != w * h:
        raise FormatError(
            f"{path}: payload size {len(payload)} inconsistent with {w}x{h} header"
        )
    return np.frombuffer(payload, dtype=np.uint8).astype(np.float64).reshape(h, w)


def _save_pgm(arr, path):
    h, w = arr.shape
    try:
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(quantize_u8(arr).tobytes())
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


def _load_png(path):
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise FormatError("PNG support requires Pillow") from exc
    with Image.open(path) as img:
        if img.mode != "L":
            raise FormatError(
                f"{path}: only 8-bit grayscale PNG is supported, got mode {img.mode!r}"
            )
        return np.asarray(img, dtype=np.float64)
