"""Token-grid producer: frozen encoders over letterboxed images.

Writes the exchange format consumed by the segmentation side and rasterizes
dense annotation masks into token-label files; the two packages meet only
at those files.
"""

from .backbones import Encoder, RandomProjectionEncoder, TorchScriptEncoder, get_encoder
from .errors import ExtractorError, ImageReadError, MaskShapeError, MissingCheckpointError
from .extract import extract, extract_batch, letterbox_image, load_image
from .geometry import Letterbox, plan_letterbox
from .rasterize import rasterize_annotation
from .writer import write_token_file

__version__ = "0.1.0"

__all__ = [
    "Encoder",
    "ExtractorError",
    "ImageReadError",
    "Letterbox",
    "MaskShapeError",
    "MissingCheckpointError",
    "RandomProjectionEncoder",
    "TorchScriptEncoder",
    "extract",
    "extract_batch",
    "get_encoder",
    "letterbox_image",
    "load_image",
    "plan_letterbox",
    "rasterize_annotation",
    "write_token_file",
]
