"""Evaluation metrics (IoU, mIoU, IPR) and the analytic cost model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binarize import Mask


@dataclass(frozen=True)
class CostEstimate:
    """Arithmetic-only model; no backbone inference or hardware effects.

    The sparse path is modeled with nnz = xi * M entries (pre-symmetrization
    count), f64 values, u32 column indices, and i64 row offsets.
    """

    affinity_flops: int
    eigensolve_flops: int
    dense_bytes: int
    sparse_bytes: int | None


def iou(a: Mask, b: Mask) -> float:
    """Intersection over union; two empty masks agree perfectly (1.0)."""
    if (a.grid_h, a.grid_w) != (b.grid_h, b.grid_w):
        raise ValueError(
            f"mask shapes differ: {a.grid_h}x{a.grid_w} vs {b.grid_h}x{b.grid_w}"
        )
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(a.bits & b.bits))
    return inter / union


def mean_iou(pairs: list[tuple[Mask, Mask]]) -> float:
    """Arithmetic mean of per-pair IoU."""
    if not pairs:
        raise ValueError("mean_iou needs at least one mask pair")
    return float(np.mean([iou(a, b) for a, b in pairs]))


def ipr(v: np.ndarray) -> float:
    """Inverse participation ratio, sum(v^4) / sum(v^2)^2; scale-invariant."""
    v = np.asarray(v, dtype=np.float64)
    sq = float(np.sum(v * v))
    if sq == 0.0:
        raise ValueError("IPR undefined for the zero vector")
    return float(np.sum(v**4)) / sq**2


def estimate_cost(
    n_tokens: int,
    n_priors: int,
    dim: int,
    iters: int,
    k: int,
    xi: int | None = None,
) -> CostEstimate:
    """Analytic FLOP and memory model of the affinity + eigensolve stages.

    affinity_flops = 2 M^2 d for the Gram matrix with M = n_tokens +
    n_priors; the eigensolve costs iters * k * 2 * M^2 dense, or
    iters * k * 2 * nnz on the sparse path.
    """
    for name, value in (
        ("n_tokens", n_tokens),
        ("n_priors", n_priors),
        ("dim", dim),
        ("iters", iters),
        ("k", k),
    ):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    m = n_tokens + n_priors
    affinity = 2 * m * m * dim
    dense_bytes = 8 * m * m
    if xi is None:
        return CostEstimate(
            affinity_flops=affinity,
            eigensolve_flops=iters * k * 2 * m * m,
            dense_bytes=dense_bytes,
            sparse_bytes=None,
        )
    if not 1 <= xi <= m - 1:
        raise ValueError(f"xi must satisfy 1 <= xi <= {m - 1}, got {xi}")
    nnz = xi * m
    return CostEstimate(
        affinity_flops=affinity,
        eigensolve_flops=iters * k * 2 * nnz,
        dense_bytes=dense_bytes,
        sparse_bytes=8 * nnz + 4 * nnz + 8 * (m + 1),
    )
