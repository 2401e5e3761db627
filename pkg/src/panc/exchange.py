"""Token-grid exchange format and in-memory token types.

A token grid travels as two files: a little-endian binary blob and a JSON
sidecar at ``<path>.meta.json``.  Binary layout::

    magic   4 bytes  b"PANC"
    version u32      1
    grid_h  u32
    grid_w  u32
    dim     u32
    has_cls u8       0 or 1
    pad     u8 * 3   zero
    tokens  f32 * (grid_h * grid_w * dim), row-major
    cls     f32 * dim, only when has_cls == 1

Payloads are stored at 32 bits; computation downstream runs at 64 bits.
Row norms are checked on load: drift up to 1e-5 is accepted as-is, drift
below 1e-2 is silently renormalized, anything larger is a format error.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateVectorError, FormatError

MAGIC = b"PANC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIB3x")

NORM_ACCEPT = 1e-5
NORM_REPAIR = 1e-2


@dataclass(frozen=True)
class ImageMeta:
    image_id: str
    source_h: int
    source_w: int
    patch: int
    backbone_tag: str

    def validate(self) -> None:
        # Source dims describe the original image before the producer's
        # resize/pad step, so they carry no divisibility constraint here.
        if self.patch <= 0:
            raise FormatError(f"patch must be positive, got {self.patch}")
        if self.source_h <= 0 or self.source_w <= 0:
            raise FormatError(f"source dims must be positive, got {self.source_h}x{self.source_w}")


@dataclass(frozen=True)
class TokenGrid:
    """Unit-norm patch embeddings on a regular grid, plus optional CLS."""

    grid_h: int
    grid_w: int
    tokens: np.ndarray  # (n, dim) float32, rows unit norm
    cls: np.ndarray | None  # (dim,) float32 or None
    meta: ImageMeta

    @property
    def n(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[1])

    def validate(self) -> None:
        if self.grid_h < 1 or self.grid_w < 1 or self.n < 2:
            raise FormatError(f"grid {self.grid_h}x{self.grid_w} too small")
        if self.tokens.shape != (self.n, self.dim):
            raise FormatError(f"token matrix shape {self.tokens.shape} != ({self.n}, {self.dim})")
        _check_payload(self.tokens, "tokens")
        if self.cls is not None:
            if self.cls.shape != (self.dim,):
                raise FormatError(f"cls shape {self.cls.shape} != ({self.dim},)")
            _check_payload(self.cls.reshape(1, -1), "cls")
        self.meta.validate()


def _check_payload(rows: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(rows)):
        raise FormatError(f"non-finite entry in {what}")
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    drift = np.abs(norms - 1.0)
    worst = int(np.argmax(drift))
    if drift[worst] > NORM_ACCEPT:
        raise FormatError(
            f"{what} row {worst} has norm {norms[worst]:.6f}, outside unit tolerance"
        )


def l2_normalize(vectors: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; raises on rows with norm <= 1e-12."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {v.shape}")
    norms = np.linalg.norm(v, axis=1)
    bad = np.flatnonzero(norms <= 1e-12)
    if bad.size:
        row = int(bad[0])
        raise DegenerateVectorError(row, float(norms[row]))
    return v / norms[:, None]


def _repair_norms(rows: np.ndarray, what: str) -> np.ndarray:
    """Load-time norm policy: accept <=1e-5, renormalize <1e-2, reject beyond."""
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    drift = np.abs(norms - 1.0)
    worst = int(np.argmax(drift))
    if drift[worst] >= NORM_REPAIR:
        raise FormatError(
            f"{what} row {worst} has norm {norms[worst]:.6f}; "
            f"deviation {drift[worst]:.3e} exceeds the repair limit {NORM_REPAIR:g}"
        )
    if drift[worst] <= NORM_ACCEPT:
        return rows
    fixed = l2_normalize(rows).astype(np.float32)
    return fixed


def read_token_grid(path: str | Path) -> TokenGrid:
    """Load a token grid, validating format, finiteness, and row norms."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than header")
    magic, version, grid_h, grid_w, dim, has_cls = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if has_cls not in (0, 1):
        raise FormatError(f"{path}: has_cls flag must be 0 or 1, got {has_cls}")
    n = grid_h * grid_w
    if n < 2 or dim < 1:
        raise FormatError(f"{path}: degenerate geometry {grid_h}x{grid_w}, dim {dim}")
    expect = _HEADER.size + 4 * (n * dim + (dim if has_cls else 0))
    if len(raw) != expect:
        raise FormatError(f"{path}: payload truncated or padded ({len(raw)} bytes, expected {expect})")

    flat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    tokens = flat[: n * dim].reshape(n, dim).copy()
    cls = flat[n * dim :].copy() if has_cls else None
    if not np.all(np.isfinite(tokens)) or (cls is not None and not np.all(np.isfinite(cls))):
        raise FormatError(f"{path}: non-finite payload entry")
    tokens = _repair_norms(tokens, "tokens")
    if cls is not None:
        cls = _repair_norms(cls.reshape(1, -1), "cls").reshape(-1)

    meta = read_sidecar(path)
    grid = TokenGrid(grid_h=grid_h, grid_w=grid_w, tokens=tokens, cls=cls, meta=meta)
    grid.validate()
    return grid


def read_sidecar(path: str | Path) -> ImageMeta:
    side = Path(str(path) + ".meta.json")
    if not side.exists():
        raise FormatError(f"missing sidecar {side}")
    try:
        doc = json.loads(side.read_text())
        return ImageMeta(
            image_id=str(doc["image_id"]),
            source_h=int(doc["source_h"]),
            source_w=int(doc["source_w"]),
            patch=int(doc["patch"]),
            backbone_tag=str(doc["backbone_tag"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad sidecar {side}: {exc}") from exc


def write_token_grid(grid: TokenGrid, path: str | Path) -> None:
    """Write grid and sidecar; the pair round-trips bit-exactly."""
    grid.validate()
    path = Path(path)
    has_cls = 1 if grid.cls is not None else 0
    header = _HEADER.pack(MAGIC, VERSION, grid.grid_h, grid.grid_w, grid.dim, has_cls)
    tokens = np.ascontiguousarray(grid.tokens, dtype="<f4")
    blobs = [header, tokens.tobytes()]
    if grid.cls is not None:
        blobs.append(np.ascontiguousarray(grid.cls, dtype="<f4").tobytes())
    path.write_bytes(b"".join(blobs))
    sidecar = {
        "image_id": grid.meta.image_id,
        "source_h": grid.meta.source_h,
        "source_w": grid.meta.source_w,
        "patch": grid.meta.patch,
        "backbone_tag": grid.meta.backbone_tag,
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def make_grid(
    tokens: np.ndarray,
    grid_h: int,
    grid_w: int,
    meta: ImageMeta,
    cls: np.ndarray | None = None,
    normalize: bool = True,
) -> TokenGrid:
    """Build a TokenGrid from float data, normalizing rows unless told not to."""
    arr = np.asarray(tokens, dtype=np.float64).reshape(grid_h * grid_w, -1)
    if normalize:
        arr = l2_normalize(arr)
    c = None
    if cls is not None:
        c = np.asarray(cls, dtype=np.float64).reshape(1, -1)
        if normalize:
            c = l2_normalize(c)
        c = c.astype(np.float32).reshape(-1)
    grid = TokenGrid(
        grid_h=grid_h,
        grid_w=grid_w,
        tokens=arr.astype(np.float32),
        cls=c,
        meta=meta,
    )
    grid.validate()
    return grid
