"""Image to token-grid extraction through a frozen encoder.

The image is letterboxed onto a square canvas (pad region black), encoded
patchwise, L2-normalized, and written in the exchange format with the
placement recorded in the sidecar.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .backbones import Encoder, get_encoder
from .errors import ExtractorError, ImageReadError
from .geometry import Letterbox, plan_letterbox
from .writer import write_token_file


def load_image(path: str | Path) -> np.ndarray:
    """Decode any Pillow-readable raster to (h, w, 3) uint8 RGB."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except FileNotFoundError as exc:
        raise ImageReadError(str(path), "no such file") from exc
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageReadError(str(path), str(exc)) from exc


def letterbox_image(image: np.ndarray, target: int) -> tuple[np.ndarray, Letterbox]:
    """Place an RGB image on a black target x target canvas, aspect preserved.

    Returns the canvas as float64 in [0, 1] plus the placement record.
    """
    from PIL import Image

    h, w = image.shape[:2]
    lb = plan_letterbox(h, w, target)
    resized = np.asarray(
        Image.fromarray(image).resize(
            (lb.content_w, lb.content_h), resample=Image.BILINEAR
        )
    )
    canvas = np.zeros((target, target, 3), dtype=np.float64)
    canvas[
        lb.pad_top : lb.pad_top + lb.content_h,
        lb.pad_left : lb.pad_left + lb.content_w,
    ] = resized.astype(np.float64) / 255.0
    return canvas, lb


def _unit_rows(rows: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    bad = np.flatnonzero(norms <= 1e-12)
    if bad.size:
        raise ExtractorError(f"{what} row {int(bad[0])} has degenerate norm")
    return rows / norms[:, None]


def extract(
    image_path: str | Path,
    backbone_tag: str,
    target_resolution: int,
    patch: int,
    out_path: str | Path,
    image_id: str | None = None,
    encoder: Encoder | None = None,
) -> Path:
    """Encode one image and write the token-grid file pair. Returns the path."""
    if patch < 1:
        raise ValueError(f"patch must be positive, got {patch}")
    if target_resolution < 2 * patch or target_resolution % patch != 0:
        raise ValueError(
            f"target resolution {target_resolution} must be a multiple of "
            f"patch {patch}, at least two patches wide"
        )
    image = load_image(image_path)
    canvas, lb = letterbox_image(image, target_resolution)
    enc = encoder if encoder is not None else get_encoder(backbone_tag)
    tokens, cls = enc.encode(canvas, patch)
    side = target_resolution // patch
    if tokens.shape[0] != side * side:
        raise ExtractorError(
            f"encoder produced {tokens.shape[0]} tokens for a {side}x{side} grid"
        )
    tokens = _unit_rows(np.asarray(tokens, dtype=np.float64), "tokens")
    if cls is not None:
        cls = _unit_rows(np.asarray(cls, dtype=np.float64).reshape(1, -1), "cls")[0]
    sidecar = {
        "image_id": image_id if image_id is not None else Path(image_path).stem,
        "source_h": int(image.shape[0]),
        "source_w": int(image.shape[1]),
        "patch": patch,
        "backbone_tag": backbone_tag,
        "letterbox": lb.to_doc(),
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_token_file(out_path, side, side, tokens, cls, sidecar)
    return out_path


def extract_batch(
    image_paths: list[str | Path],
    backbone_tag: str,
    target_resolution: int,
    patch: int,
    out_dir: str | Path,
    workers: int = 1,
) -> list[Path]:
    """Extract many images to <out_dir>/<stem>.tokens, preserving input order.

    One encoder instance per worker thread; the encoders are stateless
    after construction, so results do not depend on the schedule.
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    local = threading.local()

    def job(path: str | Path) -> Path:
        if not hasattr(local, "encoder"):
            local.encoder = get_encoder(backbone_tag)
        return extract(
            path,
            backbone_tag,
            target_resolution,
            patch,
            out_dir / f"{Path(path).stem}.tokens",
            encoder=local.encoder,
        )

    if workers == 1:
        return [job(p) for p in image_paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, image_paths))
