"""Token-grid file writer.

Independent restatement of the consumer's exchange layout so the two sides
validate each other instead of sharing code::

    magic   4 bytes  b"PANC"
    version u32      1
    grid_h  u32
    grid_w  u32
    dim     u32
    has_cls u8       0 or 1
    pad     u8 * 3   zero
    tokens  f32 * (grid_h * grid_w * dim), row-major, little-endian
    cls     f32 * dim, only when has_cls == 1

The JSON sidecar lands at ``<path>.meta.json``. Consumers read the five
standard keys; the extractor adds a ``letterbox`` record on top.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ExtractorError

MAGIC = b"PANC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIB3x")


def write_token_file(
    path: str | Path,
    grid_h: int,
    grid_w: int,
    tokens: np.ndarray,
    cls: np.ndarray | None,
    sidecar: dict,
) -> None:
    """Write the binary grid and its sidecar."""
    n = grid_h * grid_w
    arr = np.ascontiguousarray(tokens, dtype="<f4")
    if arr.shape[0] != n or arr.ndim != 2:
        raise ExtractorError(f"token matrix shape {arr.shape} != ({n}, dim)")
    if not np.all(np.isfinite(arr)):
        raise ExtractorError("non-finite token value")
    dim = arr.shape[1]
    blobs = [_HEADER.pack(MAGIC, VERSION, grid_h, grid_w, dim, 0 if cls is None else 1)]
    blobs.append(arr.tobytes())
    if cls is not None:
        c = np.ascontiguousarray(cls, dtype="<f4").reshape(-1)
        if c.shape != (dim,):
            raise ExtractorError(f"cls shape {c.shape} != ({dim},)")
        if not np.all(np.isfinite(c)):
            raise ExtractorError("non-finite cls value")
        blobs.append(c.tobytes())
    path = Path(path)
    path.write_bytes(b"".join(blobs))
    Path(str(path) + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
