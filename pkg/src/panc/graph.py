"""Feature affinity graph: temperature kernel, top-xi sparsification, anchors.

Vertices 0..M-1 are feature vertices (image tokens followed by injected
prior embeddings). Anchoring appends two extra vertices, the positive
anchor at index M and the negative anchor at index M+1, each coupled with
weight alpha to the vertices carrying its label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MissingLabelError


@dataclass(frozen=True)
class AffinityMatrix:
    """Dense symmetric nonnegative affinity with a zero diagonal."""

    entries: np.ndarray  # (M, M) float64

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])


@dataclass(frozen=True)
class SparseAffinity:
    """Symmetric CSR affinity; entry (i,j) stored iff (j,i) is stored."""

    size: int
    indptr: np.ndarray  # (size+1,) int64
    indices: np.ndarray  # (nnz,) int64
    data: np.ndarray  # (nnz,) float64

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])

    @property
    def density(self) -> float:
        return self.nnz / float(self.size) ** 2

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=np.float64)
        rows = np.repeat(np.arange(self.size, dtype=np.int64), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out


@dataclass(frozen=True)
class AnchoredGraph:
    """Feature graph plus the two label anchors of the block affinity."""

    w_feat: AffinityMatrix | SparseAffinity
    coupling: float  # alpha > 0
    positive_indices: np.ndarray  # sorted vertex indices in [0, M)
    negative_indices: np.ndarray

    @property
    def feat_size(self) -> int:
        return self.w_feat.size

    @property
    def size(self) -> int:
        return self.w_feat.size + 2

    @property
    def anchor_positive(self) -> int:
        return self.w_feat.size

    @property
    def anchor_negative(self) -> int:
        return self.w_feat.size + 1

    @property
    def is_sparse(self) -> bool:
        return isinstance(self.w_feat, SparseAffinity)


def build_affinity(features: np.ndarray, tau: float) -> AffinityMatrix:
    """W_ij = exp(<f_i, f_j> / tau) off the diagonal, W_ii = 0.

    Rows of `features` must be unit norm so the Gram matrix holds cosine
    similarities.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError(f"need a 2-d feature matrix with at least 2 rows, got shape {f.shape}")
    sims = f @ f.T
    # GEMM asymmetry is ~1e-16 but the exponential amplifies it; force
    # exact symmetry before the kernel.
    sims = (sims + sims.T) * 0.5
    return AffinityMatrix(entries=kernels.affinity_from_sims(sims, tau))


def sparsify(w: AffinityMatrix, xi: int) -> SparseAffinity:
    """Keep the xi largest off-diagonal entries per row, union-symmetrized.

    Ties prefer the lower column index; an edge survives when either
    endpoint selects it, keeping the original value.
    """
    m = w.size
    if not 1 <= xi <= m - 1:
        raise ValueError(f"xi must satisfy 1 <= xi <= {m - 1}, got {xi}")
    cols, _ = kernels.topk_rows(w.entries, xi)
    rows = np.repeat(np.arange(m, dtype=np.int64), xi)
    cc = cols.reshape(-1)
    # Undirected edge keys, deduplicated across the two endpoint selections.
    lo = np.minimum(rows, cc)
    hi = np.maximum(rows, cc)
    keys = np.unique(lo * np.int64(m) + hi)
    ei = keys // m
    ej = keys % m
    r2 = np.concatenate([ei, ej])
    c2 = np.concatenate([ej, ei])
    order = np.lexsort((c2, r2))
    r2 = r2[order]
    c2 = c2[order]
    v2 = w.entries[r2, c2]
    indptr = np.zeros(m + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(r2, minlength=m))
    return SparseAffinity(size=m, indptr=indptr, indices=c2, data=v2)


def compute_coupling(w: AffinityMatrix | SparseAffinity, kappa: float) -> float:
    """alpha = kappa times the mean affinity of the feature graph.

    Dense graphs average all M(M-1) off-diagonal entries; sparse graphs
    average the stored entries.
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if isinstance(w, SparseAffinity):
        if w.nnz == 0:
            raise ValueError("sparse graph has no stored entries")
        return float(kappa * w.data.mean())
    m = w.size
    if m < 2:
        raise ValueError("graph has no off-diagonal entries")
    return float(kappa * w.entries.sum() / (m * (m - 1)))


def augment_with_anchors(
    w: AffinityMatrix | SparseAffinity,
    positive_indices: np.ndarray,
    negative_indices: np.ndarray,
    kappa: float,
) -> AnchoredGraph:
    """Attach the two anchors to the labeled vertices with weight alpha.

    The index sets name the vertices of `w` carrying each label (injected
    prior vertices, plus any externally labeled tokens). alpha is computed
    on `w` before augmentation, so anchor edges never feed back into it.
    """
    pos = np.unique(np.asarray(positive_indices, dtype=np.int64))
    neg = np.unique(np.asarray(negative_indices, dtype=np.int64))
    if pos.size == 0:
        raise MissingLabelError("no positively labeled vertices; positive anchor would be isolated")
    if neg.size == 0:
        raise MissingLabelError("no negatively labeled vertices; negative anchor would be isolated")
    if np.intersect1d(pos, neg).size:
        raise ValueError("a vertex cannot carry both labels")
    m = w.size
    for name, idx in (("positive", pos), ("negative", neg)):
        if idx[0] < 0 or idx[-1] >= m:
            raise ValueError(f"{name} index out of range for graph of size {m}")
    alpha = compute_coupling(w, kappa)
    return AnchoredGraph(
        w_feat=w,
        coupling=alpha,
        positive_indices=pos,
        negative_indices=neg,
    )


def anchored_dense(g: AnchoredGraph) -> np.ndarray:
    """Materialize the (M+2) x (M+2) anchored affinity as a dense array."""
    m = g.feat_size
    feat = g.w_feat.toarray() if g.is_sparse else g.w_feat.entries
    out = np.zeros((m + 2, m + 2), dtype=np.float64)
    out[:m, :m] = feat
    out[g.positive_indices, m] = g.coupling
    out[m, g.positive_indices] = g.coupling
    out[g.negative_indices, m + 1] = g.coupling
    out[m + 1, g.negative_indices] = g.coupling
    return out


def anchored_csr(g: AnchoredGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Anchored affinity as CSR arrays (indptr, indices, data) of size M+2."""
    m = g.feat_size
    if g.is_sparse:
        w = g.w_feat
        base_counts = np.diff(w.indptr)
        src_indices, src_data, src_indptr = w.indices, w.data, w.indptr
    else:
        dense = g.w_feat.entries
        base_counts = np.full(m, m - 1, dtype=np.int64)
        src_indptr = None
        src_indices = src_data = None
    extra = np.zeros(m, dtype=np.int64)
    extra[g.positive_indices] = 1
    extra[g.negative_indices] = 1
    counts = np.concatenate(
        [base_counts + extra, [g.positive_indices.size, g.negative_indices.size]]
    )
    indptr = np.zeros(m + 3, dtype=np.int64)
    indptr[1:] = np.cumsum(counts)
    nnz = int(indptr[-1])
    indices = np.empty(nnz, dtype=np.int64)
    data = np.empty(nnz, dtype=np.float64)
    anchor_col = np.full(m, -1, dtype=np.int64)
    anchor_col[g.positive_indices] = m
    anchor_col[g.negative_indices] = m + 1
    cols_all = np.arange(m, dtype=np.int64)
    for i in range(m):
        start = indptr[i]
        if g.is_sparse:
            row_cols = src_indices[src_indptr[i] : src_indptr[i + 1]]
            row_vals = src_data[src_indptr[i] : src_indptr[i + 1]]
        else:
            row_cols = np.delete(cols_all, i)
            row_vals = np.delete(dense[i], i)
        k = row_cols.size
        indices[start : start + k] = row_cols
        data[start : start + k] = row_vals
        if anchor_col[i] >= 0:
            # Anchor columns exceed every feature column, so the row stays sorted.
            indices[start + k] = anchor_col[i]
            data[start + k] = g.coupling
    start = indptr[m]
    indices[start : start + g.positive_indices.size] = g.positive_indices
    data[start : start + g.positive_indices.size] = g.coupling
    start = indptr[m + 1]
    indices[start : start + g.negative_indices.size] = g.negative_indices
    data[start : start + g.negative_indices.size] = g.coupling
    return indptr, indices, data
