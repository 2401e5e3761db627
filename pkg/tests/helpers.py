"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from panc.bank import NEGATIVE, POSITIVE, PriorBank, PriorEntry
from panc.exchange import ImageMeta, TokenGrid, l2_normalize, make_grid
from panc.graph import augment_with_anchors, build_affinity
from panc.solver import Laplacian, normalized_laplacian


def make_meta(grid_h: int, grid_w: int, patch: int = 16, image_id: str = "img") -> ImageMeta:
    return ImageMeta(
        image_id=image_id,
        source_h=grid_h * patch,
        source_w=grid_w * patch,
        patch=patch,
        backbone_tag="test",
    )


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return l2_normalize(rng.standard_normal((n, d)))


def grid_from_tokens(tokens: np.ndarray, grid_h: int, grid_w: int, cls=None) -> TokenGrid:
    return make_grid(tokens, grid_h, grid_w, make_meta(grid_h, grid_w), cls=cls)


def random_grid(rng: np.random.Generator, grid_h: int, grid_w: int, d: int) -> TokenGrid:
    return grid_from_tokens(unit_rows(rng, grid_h * grid_w, d), grid_h, grid_w)


def bank_from_matrix(matrix: np.ndarray, labels: list[str]) -> PriorBank:
    entries = [
        PriorEntry(
            embedding=np.asarray(matrix[i], dtype=np.float64),
            label=labels[i],
            source_image=f"src-{i}",
            token_index=0,
        )
        for i in range(len(labels))
    ]
    return PriorBank(entries=entries, dim=matrix.shape[1])


def random_bank(rng: np.random.Generator, n_pos: int, n_neg: int, d: int) -> PriorBank:
    mat = unit_rows(rng, n_pos + n_neg, d)
    return bank_from_matrix(mat, [POSITIVE] * n_pos + [NEGATIVE] * n_neg)


def random_anchored_laplacian(
    rng: np.random.Generator,
    size: int,
    dim: int = 8,
    tau: float = 0.7,
    kappa: float = 2.0,
    sparse_xi: int | None = None,
) -> Laplacian:
    """Laplacian of a random connected anchored graph with `size` vertices.

    `size` counts the anchored graph, so the feature graph has size - 2
    vertices. Dense feature affinities are strictly positive, making the
    anchored graph connected by construction.
    """
    m = size - 2
    feats = unit_rows(rng, m, dim)
    w = build_affinity(feats, tau)
    if sparse_xi is not None:
        from panc.graph import sparsify

        w = sparsify(w, sparse_xi)
    n_pos = max(1, m // 8)
    n_neg = max(1, m // 8)
    perm = rng.permutation(m)
    g = augment_with_anchors(w, perm[:n_pos], perm[n_pos : n_pos + n_neg], kappa)
    return normalized_laplacian(g)
