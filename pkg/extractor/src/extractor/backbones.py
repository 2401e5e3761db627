"""Encoder registry keyed by backbone tag.

Tags:
    random-proj:<dim>[:<seed>]   seeded Gaussian projection of raw patch
                                 pixels; needs no checkpoint and exists so
                                 the full producer path can run and be
                                 tested without a deep-learning stack
    torchscript:<path>           frozen TorchScript module; called with a
                                 (1, 3, T, T) float tensor, expected to
                                 return (1, n, d) patch tokens or
                                 (1, n+1, d) with the class token first

Encoders return float64 arrays; normalization and serialization happen in
the caller, so no backbone-specific tensor type ever reaches the output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import ExtractorError, MissingCheckpointError


class Encoder(Protocol):
    def encode(self, canvas: np.ndarray, patch: int) -> tuple[np.ndarray, np.ndarray | None]:
        """Map a (T, T, 3) float canvas in [0, 1] to ((n, d) tokens, (d,) cls or None)."""


def _patch_blocks(canvas: np.ndarray, patch: int) -> np.ndarray:
    """Flatten non-overlapping patch x patch x 3 blocks, row-major. -> (n, patch^2*3)."""
    t = canvas.shape[0]
    g = t // patch
    blocks = canvas.reshape(g, patch, g, patch, 3).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(g * g, patch * patch * 3)


class RandomProjectionEncoder:
    """Deterministic stand-in backbone: fixed Gaussian projection of pixels.

    A constant bias feature is appended so uniform patches (all-black
    padding included) still project to a nonzero vector.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ExtractorError(f"projection dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self._matrices: dict[int, np.ndarray] = {}  # keyed by input width

    def _matrix(self, in_dim: int) -> np.ndarray:
        cached = self._matrices.get(in_dim)
        if cached is None:
            rng = np.random.default_rng(self.seed)
            cached = rng.standard_normal((in_dim, self.dim))
            self._matrices[in_dim] = cached
        return cached

    def encode(self, canvas: np.ndarray, patch: int) -> tuple[np.ndarray, np.ndarray]:
        feats = _patch_blocks(np.asarray(canvas, dtype=np.float64), patch) - 0.5
        feats = np.hstack([feats, np.ones((feats.shape[0], 1))])
        tokens = feats @ self._matrix(feats.shape[1])
        # Projection is linear, so this is the projection of the mean patch.
        cls = tokens.mean(axis=0)
        return tokens, cls


class TorchScriptEncoder:
    """Frozen TorchScript module loaded from disk."""

    def __init__(self, path: str):
        if not Path(path).is_file():
            raise MissingCheckpointError(path)
        try:
            import torch
        except ImportError as exc:
            raise ExtractorError("torchscript backbones require torch") from exc
        self._torch = torch
        self._model = torch.jit.load(path, map_location="cpu").eval()

    def encode(self, canvas: np.ndarray, patch: int) -> tuple[np.ndarray, np.ndarray | None]:
        torch = self._torch
        x = torch.from_numpy(
            np.ascontiguousarray(canvas.transpose(2, 0, 1), dtype=np.float32)
        ).unsqueeze(0)
        with torch.inference_mode():
            out = self._model(x)
        if isinstance(out, (tuple, list)):
            tokens_t, cls_t = out
            tokens = tokens_t.squeeze(0).cpu().numpy().astype(np.float64)
            cls = cls_t.reshape(-1).cpu().numpy().astype(np.float64)
            return tokens, cls
        seq = out.squeeze(0).cpu().numpy().astype(np.float64)
        n = (canvas.shape[0] // patch) ** 2
        if seq.shape[0] == n:
            return seq, None
        if seq.shape[0] == n + 1:
            return seq[1:], seq[0]
        raise ExtractorError(
            f"model returned {seq.shape[0]} tokens, expected {n} or {n + 1}"
        )


def get_encoder(tag: str) -> Encoder:
    """Instantiate the encoder named by a backbone tag."""
    scheme, _, rest = tag.partition(":")
    if scheme == "random-proj":
        parts = rest.split(":") if rest else []
        if not 1 <= len(parts) <= 2:
            raise ExtractorError(f"bad random-proj tag {tag!r}, want random-proj:<dim>[:<seed>]")
        try:
            dim = int(parts[0])
            seed = int(parts[1]) if len(parts) == 2 else 0
        except ValueError as exc:
            raise ExtractorError(f"bad random-proj tag {tag!r}: {exc}") from exc
        return RandomProjectionEncoder(dim, seed)
    if scheme == "torchscript":
        if not rest:
            raise ExtractorError(f"bad torchscript tag {tag!r}, want torchscript:<path>")
        return TorchScriptEncoder(rest)
    raise ExtractorError(f"unknown backbone tag {tag!r}")
