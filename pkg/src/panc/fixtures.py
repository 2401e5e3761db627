"""Planted-structure token grids and banks for tests and oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bank import NEGATIVE, POSITIVE, PriorBank, PriorEntry
from .binarize import Mask
from .exchange import ImageMeta, TokenGrid, l2_normalize, make_grid


@dataclass(frozen=True)
class PlantedFixture:
    grid: TokenGrid
    truth: Mask
    bank: PriorBank
    assignments: np.ndarray  # (n,) cluster index per token
    directions: np.ndarray  # (n_clusters, dim) exact cluster centers


def cluster_directions(dim: int, n_clusters: int, separation_deg: float) -> np.ndarray:
    """Unit vectors with pairwise angle `separation_deg`.

    Built as cos'*g + sin'*e_i over orthonormal axes, so the pairwise dot
    is cos(separation) exactly; 90 degrees gives the plain orthonormal
    basis.
    """
    if n_clusters < 2:
        raise ValueError(f"need at least 2 clusters, got {n_clusters}")
    if not 0.0 < separation_deg <= 90.0:
        raise ValueError(f"separation must lie in (0, 90] degrees, got {separation_deg}")
    cos_sep = math.cos(math.radians(separation_deg))
    if abs(cos_sep) < 1e-15:
        if dim < n_clusters:
            raise ValueError(f"dim {dim} too small for {n_clusters} orthogonal clusters")
        return np.eye(n_clusters, dim)
    if dim < n_clusters + 1:
        raise ValueError(f"dim {dim} too small for {n_clusters} clusters at {separation_deg} deg")
    a = math.sqrt(cos_sep)  # pairwise dot = a^2 = cos(separation)
    b = math.sqrt(1.0 - cos_sep)
    dirs = np.zeros((n_clusters, dim))
    dirs[:, 0] = a
    for c in range(n_clusters):
        dirs[c, c + 1] = b
    return dirs


def planted_clusters(
    grid_h: int,
    grid_w: int,
    dim: int,
    n_clusters: int = 2,
    separation: float = 90.0,
    noise: float = 0.0,
    seed: int = 0,
) -> PlantedFixture:
    """Token grid drawn around well-separated directions, plus exact-center
    bank priors and a cluster-0 ground-truth mask.

    Tokens are assigned round-robin to clusters, so the structure is
    identical across seeds; only the noise differs.
    """
    if grid_h < 1 or grid_w < 1 or grid_h * grid_w < 2:
        raise ValueError(f"grid {grid_h}x{grid_w} too small")
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    n = grid_h * grid_w
    if n < n_clusters:
        raise ValueError(f"{n} tokens cannot cover {n_clusters} clusters")
    dirs = cluster_directions(dim, n_clusters, separation)
    assignments = np.arange(n, dtype=np.int64) % n_clusters
    rng = np.random.default_rng(seed)
    tokens = dirs[assignments]
    if noise > 0:
        tokens = tokens + noise * rng.standard_normal((n, dim))
    tokens = l2_normalize(tokens)
    patch = 16
    meta = ImageMeta(
        image_id=f"planted-{seed}",
        source_h=grid_h * patch,
        source_w=grid_w * patch,
        patch=patch,
        backbone_tag="synthetic",
    )
    grid = make_grid(tokens, grid_h, grid_w, meta, normalize=False)
    truth = Mask(bits=assignments == 0, grid_h=grid_h, grid_w=grid_w)
    entries = [
        PriorEntry(
            embedding=dirs[c].copy(),
            label=POSITIVE if c == 0 else NEGATIVE,
            source_image=meta.image_id,
            token_index=int(np.flatnonzero(assignments == c)[0]),
        )
        for c in range(n_clusters)
    ]
    bank = PriorBank(entries=entries, dim=dim)
    bank.validate()
    return PlantedFixture(
        grid=grid,
        truth=truth,
        bank=bank,
        assignments=assignments,
        directions=dirs,
    )
