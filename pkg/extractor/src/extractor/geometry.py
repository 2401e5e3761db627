"""Letterbox placement of a source image inside a square encoder canvas.

The source is scaled by target/max(h, w) (aspect preserved, upscaling
allowed) and centered; the remainder is padding. The placement is written
to the grid sidecar so the annotation rasterizer can replay the exact same
transform later.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ExtractorError


@dataclass(frozen=True)
class Letterbox:
    target: int
    content_h: int
    content_w: int
    pad_top: int
    pad_left: int

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "Letterbox":
        try:
            return cls(
                target=int(doc["target"]),
                content_h=int(doc["content_h"]),
                content_w=int(doc["content_w"]),
                pad_top=int(doc["pad_top"]),
                pad_left=int(doc["pad_left"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ExtractorError(f"bad letterbox record: {exc}") from exc


def plan_letterbox(source_h: int, source_w: int, target: int) -> Letterbox:
    """Compute the content box for a source image on a target x target canvas."""
    if source_h < 1 or source_w < 1:
        raise ValueError(f"source dims must be positive, got {source_h}x{source_w}")
    if target < 1:
        raise ValueError(f"target must be positive, got {target}")
    scale = target / max(source_h, source_w)
    # The longer side lands exactly on target; the shorter one rounds.
    content_h = max(1, min(target, round(source_h * scale)))
    content_w = max(1, min(target, round(source_w * scale)))
    return Letterbox(
        target=target,
        content_h=content_h,
        content_w=content_w,
        pad_top=(target - content_h) // 2,
        pad_left=(target - content_w) // 2,
    )
