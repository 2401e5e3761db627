"""Pure NumPy implementations of the hot kernels.

Always importable. The compiled module ``panc._core`` mirrors this API
exactly; ``panc.kernels`` picks one of the two at import time.
"""

from __future__ import annotations

import numpy as np

BACKEND = "fallback"

# Matches the exp(S / (tau + eps)) affinity form.
TAU_EPS = 1e-12


def affinity_from_sims(sims: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise exp(S_ij / (tau + eps)) with the diagonal zeroed."""
    s = np.asarray(sims, dtype=np.float64)
    out = np.exp(s / (tau + TAU_EPS))
    k = min(out.shape[0], out.shape[1])
    out[np.arange(k), np.arange(k)] = 0.0
    return out


def topk_rows(w: np.ndarray, xi: int) -> tuple[np.ndarray, np.ndarray]:
    """Column indices and values of the xi largest off-diagonal entries per row.

    Ties prefer the lower column index. Each output row is sorted by column
    index ascending. Requires 1 <= xi <= m - 1.
    """
    a = np.asarray(w, dtype=np.float64)
    m = a.shape[0]
    cols = np.empty((m, xi), dtype=np.int64)
    vals = np.empty((m, xi), dtype=np.float64)
    # Chunk rows so the argsort workspace stays around 32 MB at any m.
    chunk = max(1, (1 << 22) // max(m, 1))
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        block = -a[start:stop]
        block = block.copy()
        rows = np.arange(stop - start)
        block[rows, np.arange(start, stop)] = np.inf
        # Stable sort of the negated block: descending by value, ties by
        # lower column index.
        order = np.argsort(block, axis=1, kind="stable")[:, :xi].astype(np.int64)
        order.sort(axis=1)
        cols[start:stop] = order
        vals[start:stop] = np.take_along_axis(a[start:stop], order, axis=1)
    return cols, vals


def csr_matmat(
    data: np.ndarray,
    indices: np.ndarray,
    indptr: np.ndarray,
    dense: np.ndarray,
) -> np.ndarray:
    """CSR (m x m) times dense (m x k), returned as a dense (m x k) array."""
    d = np.asarray(data, dtype=np.float64)
    idx = np.asarray(indices, dtype=np.int64)
    ptr = np.asarray(indptr, dtype=np.int64)
    b = np.ascontiguousarray(dense, dtype=np.float64)
    m = ptr.shape[0] - 1
    out = np.zeros((m, b.shape[1]), dtype=np.float64)
    if d.shape[0] == 0:
        return out
    rows = np.repeat(np.arange(m, dtype=np.int64), np.diff(ptr))
    contrib = d[:, None] * b[idx]
    for j in range(b.shape[1]):
        out[:, j] = np.bincount(rows, weights=contrib[:, j], minlength=m)
    return out
