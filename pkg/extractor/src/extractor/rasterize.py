"""Dense annotation mask to per-token labels.

The mask arrives at the source image resolution; the sidecar's letterbox
record replays the producer transform (nearest-neighbor, since labels are
categorical) onto the encoder canvas, and each patch is labeled positive
iff strictly more than half of its pixels are mask-positive. Padding
counts as background.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ExtractorError, ImageReadError, MaskShapeError
from .geometry import Letterbox


def _load_mask(path: str | Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L")) > 0
    except FileNotFoundError as exc:
        raise ImageReadError(str(path), "no such file") from exc
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageReadError(str(path), str(exc)) from exc


def _nearest_index(content: int, source: int) -> np.ndarray:
    # Center-sampled nearest neighbor; identity when content == source.
    idx = np.floor((np.arange(content) + 0.5) * (source / content)).astype(np.int64)
    return np.clip(idx, 0, source - 1)


def rasterize_annotation(
    mask_path: str | Path,
    sidecar_path: str | Path,
    out_path: str | Path,
) -> list[tuple[int, str]]:
    """Write the token-label file for one annotated image; returns the labels."""
    try:
        doc = json.loads(Path(sidecar_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ExtractorError(f"cannot read sidecar {sidecar_path}: {exc}") from exc
    if "letterbox" not in doc:
        raise ExtractorError(
            f"sidecar {sidecar_path} has no letterbox record; "
            "annotation rasterization needs the producer transform"
        )
    lb = Letterbox.from_doc(doc["letterbox"])
    source_h, source_w = int(doc["source_h"]), int(doc["source_w"])
    patch = int(doc["patch"])

    mask = _load_mask(mask_path)
    if mask.shape != (source_h, source_w):
        raise MaskShapeError(mask.shape, (source_h, source_w))

    canvas = np.zeros((lb.target, lb.target), dtype=bool)
    sy = _nearest_index(lb.content_h, source_h)
    sx = _nearest_index(lb.content_w, source_w)
    canvas[
        lb.pad_top : lb.pad_top + lb.content_h,
        lb.pad_left : lb.pad_left + lb.content_w,
    ] = mask[np.ix_(sy, sx)]

    g = lb.target // patch
    counts = canvas.reshape(g, patch, g, patch).sum(axis=(1, 3)).reshape(-1)
    half = patch * patch  # strict: 2 * covered > patch^2
    labels = [
        (i, "positive" if 2 * int(c) > half else "negative")
        for i, c in enumerate(counts)
    ]

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        json.dumps({"image_id": doc["image_id"], "labels": labels}, indent=2) + "\n"
    )
    return labels
