"""Decoupling a binary glass mask into interior- and boundary-diffusion labels.

The ground-truth mask is split into two soft supervision maps: an interior map
that peaks at the glass center and fades toward the rim, and a boundary map
that peaks at the rim and fades inward. The split is driven by the exact
Euclidean distance from each foreground pixel to the nearest background pixel,
linearly normalized over the image; the two maps always sum back to the mask.

Pixels outside the image frame count as background, so distances stay finite
even for masks that are foreground everywhere.

All distance arithmetic happens on squared integer distances (exact); square
roots are taken once, in float64.
"""

import struct
from typing import NamedTuple

import numpy as np

from .errors import FileFormatError, InvalidInputError


class DecoupledLabels(NamedTuple):
    """Soft label pair; `interior + boundary` equals the source mask."""

    interior: np.ndarray
    boundary: np.ndarray


def validate_mask(mask: np.ndarray) -> np.ndarray:
    """Check a binary mask and return it as uint8 {0,1}."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise InvalidInputError(f"mask must be a non-empty 2-D array, got shape {mask.shape}")
    values = np.unique(mask)
    if not np.isin(values, (0, 1)).all():
        raise InvalidInputError("mask values must be exactly 0 or 1")
    return mask.astype(np.uint8, copy=False)


def _column_distances(mask: np.ndarray) -> np.ndarray:
    """Per-pixel vertical distance to the nearest background pixel in the same
    column, counting the rows just outside the image as background."""
    h, w = mask.shape
    fg = mask != 0
    d = np.empty((h, w), dtype=np.int64)
    prev = np.zeros(w, dtype=np.int64)  # virtual background row above the image
    for y in range(h):
        prev = np.where(fg[y], prev + 1, 0)
        d[y] = prev
    nxt = np.zeros(w, dtype=np.int64)  # virtual background row below
    for y in range(h - 1, -1, -1):
        nxt = np.where(fg[y], nxt + 1, 0)
        np.minimum(d[y], nxt, out=d[y])
    return d


def squared_distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest background pixel.

    Background pixels (and everything outside the frame) are sources; the
    result is int64 and exact, 0 on background.
    """
    mask = validate_mask(mask)
    h, w = mask.shape
    col = _column_distances(mask)
    colsq = col * col

    x = np.arange(w, dtype=np.int64)
    # (x - qx)^2 for every target/source column pair inside the image
    cross = (x[:, None] - x[None, :]) ** 2
    # whole columns just outside the frame are background at every row
    frame = np.minimum((x + 1) ** 2, (w - x) ** 2)

    out = np.empty((h, w), dtype=np.int64)
    block = max(1, int(2**22 // max(w * w, 1)))
    for y0 in range(0, h, block):
        y1 = min(y0 + block, h)
        # min over source columns of (x-qx)^2 + colsq[y, qx]
        best = (colsq[y0:y1, None, :] + cross[None, :, :]).min(axis=2)
        out[y0:y1] = np.minimum(best, frame[None, :])
    out[mask == 0] = 0
    return out


def euclidean_distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance map (float64) of a binary mask."""
    return np.sqrt(squared_distance_transform(mask).astype(np.float64))


def normalize_distance_map(d: np.ndarray) -> np.ndarray:
    """Linear rescale to [0,1]; a constant map normalizes to all zeros."""
    d = np.asarray(d, dtype=np.float64)
    lo = d.min()
    hi = d.max()
    if hi == lo:
        return np.zeros_like(d)
    return (d - lo) / (hi - lo)


def decouple(mask: np.ndarray) -> DecoupledLabels:
    """Split a mask into interior- and boundary-diffusion labels.

    interior = mask * normalized_distance, boundary = mask * (1 - normalized
    distance); both are zero on background and sum to the mask exactly.
    """
    mask = validate_mask(mask)
    norm = normalize_distance_map(euclidean_distance_transform(mask))
    m = mask.astype(np.float64)
    interior = m * norm
    boundary = m * (1.0 - norm)
    return DecoupledLabels(interior=interior, boundary=boundary)


# ---------------------------------------------------------------------------
# Lossless float sidecar ("GLDT"): little-endian magic + u32 height + u32
# width + row-major float32 payload. Used when 8-bit PNGs would round.

_GLDT_MAGIC = b"GLDT"


def write_float_map(path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise InvalidInputError(f"float map must be 2-D, got shape {values.shape}")
    h, w = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_GLDT_MAGIC)
        f.write(struct.pack("<II", h, w))
        f.write(payload.tobytes())


def read_float_map(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) != 12 or header[:4] != _GLDT_MAGIC:
            raise FileFormatError(f"{path}: not a GLDT float map")
        h, w = struct.unpack("<II", header[4:])
        payload = f.read(4 * h * w)
    if len(payload) != 4 * h * w:
        raise FileFormatError(f"{path}: truncated GLDT payload")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).copy()
