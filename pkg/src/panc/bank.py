"""Labeled prior bank: representative selection, rasterized token labels,
relevance scoring, and diversity-aware retrieval.

Representatives come from seeded k-means++ over unit-norm CLS vectors.
Retrieval scores each bank entry by the mean of its top-K_sim cosine
similarities to the current image's tokens, then selects per label by
one of three modes: random, nearest, or MMR (relevance minus the maximum
similarity to already-selected entries, weighted by lambda).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, MissingLabelError
from .exchange import TokenGrid, l2_normalize

POSITIVE = "positive"
NEGATIVE = "negative"
LABELS = (POSITIVE, NEGATIVE)

KMEANS_MAX_ITERS = 100
KMEANS_SHIFT_TOL = 1e-6


@dataclass(frozen=True)
class PriorEntry:
    embedding: np.ndarray  # (d,) float64, unit norm
    label: str  # positive | negative
    source_image: str
    token_index: int


@dataclass(frozen=True)
class PriorBank:
    entries: list[PriorEntry]
    dim: int

    def validate(self) -> None:
        if not self.entries:
            raise ValueError("empty prior bank")
        labels = {e.label for e in self.entries}
        for label in LABELS:
            if label not in labels:
                raise MissingLabelError(f"bank has no {label} entries")
        for i, e in enumerate(self.entries):
            if e.label not in LABELS:
                raise ValueError(f"entry {i} has unknown label {e.label!r}")
            if e.embedding.shape != (self.dim,):
                raise ValueError(f"entry {i} has dim {e.embedding.shape}, bank dim {self.dim}")
            norm = float(np.linalg.norm(e.embedding))
            if abs(norm - 1.0) > 1e-5:
                raise ValueError(f"entry {i} embedding norm {norm:.6f} is not unit")

    def matrix(self) -> np.ndarray:
        return np.stack([e.embedding for e in self.entries])

    def label_indices(self, label: str) -> np.ndarray:
        return np.array([i for i, e in enumerate(self.entries) if e.label == label], dtype=np.int64)


@dataclass(frozen=True)
class RetrievalConfig:
    k_sim: int = 5
    max_per_label: int = 16
    m_prime: int | None = None  # prefilter size; defaults to 4 * max_per_label
    lambda_mmr: float = 0.5
    mode: str = "mmr"  # random | nearest | mmr
    seed: int = 0

    @property
    def prefilter(self) -> int:
        return self.m_prime if self.m_prime is not None else 4 * self.max_per_label

    def validate(self) -> None:
        if self.k_sim < 1:
            raise ValueError(f"k_sim must be at least 1, got {self.k_sim}")
        if self.max_per_label < 1:
            raise ValueError(f"max_per_label must be at least 1, got {self.max_per_label}")
        if self.prefilter < self.max_per_label:
            raise ValueError("m_prime must be at least max_per_label")
        if not 0.0 <= self.lambda_mmr <= 1.0:
            raise ValueError(f"lambda_mmr must lie in [0,1], got {self.lambda_mmr}")
        if self.mode not in ("random", "nearest", "mmr"):
            raise ValueError(f"unknown retrieval mode {self.mode!r}")


@dataclass(frozen=True)
class RepresentativeSet:
    image_ids: list[str]
    centroids: np.ndarray  # (k, d)


@dataclass(frozen=True)
class PriorSelection:
    positive: list[PriorEntry]
    negative: list[PriorEntry]
    positive_bank_indices: list[int] = field(default_factory=list)
    negative_bank_indices: list[int] = field(default_factory=list)
    shortfall: bool = False

    @property
    def entries(self) -> list[PriorEntry]:
        return self.positive + self.negative

    @property
    def n_selected(self) -> int:
        return len(self.positive) + len(self.negative)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ seeding; exhausted distances fall back to the
    lowest-index unchosen point so k distinct centers always come back."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0:
            remaining = [i for i in range(n) if i not in set(chosen)]
            chosen.append(remaining[0])
            continue
        idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _kmeans(points: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations to a centroid-shift tolerance; returns (centroids,
    assignment). Empty clusters are reseeded to the farthest point."""
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    assign = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(KMEANS_MAX_ITERS):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            members = np.flatnonzero(assign == c)
            if members.size:
                new_centroids[c] = points[members].mean(axis=0)
            else:
                worst = int(np.argmax(d2[np.arange(points.shape[0]), assign]))
                new_centroids[c] = points[worst]
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < KMEANS_SHIFT_TOL:
            break
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assign = np.argmin(d2, axis=1)
    return centroids, assign


def build_representatives(
    cls_matrix: np.ndarray,
    image_ids: list[str],
    k: int,
    seed: int,
) -> RepresentativeSet:
    """Cluster CLS vectors and pick, per cluster, the member closest to the
    centroid (ties by lowest input index)."""
    points = np.asarray(cls_matrix, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("cls_matrix must be a nonempty 2-d matrix")
    n = points.shape[0]
    if len(image_ids) != n:
        raise ValueError(f"{len(image_ids)} ids for {n} CLS vectors")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    centroids, assign = _kmeans(points, k, seed)
    rep_ids: list[str] = []
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if members.size == 0:
            # Reseeding above makes this unreachable in practice, but a
            # degenerate tie could starve a cluster; fall back to centroid
            # proximity over all points.
            members = np.arange(n)
        dists = np.linalg.norm(points[members] - centroids[c], axis=1)
        rep_ids.append(image_ids[int(members[np.argmin(dists)])])
    return RepresentativeSet(image_ids=rep_ids, centroids=centroids)


def tokens_from_mask(grid: TokenGrid, dense_mask: np.ndarray) -> list[tuple[int, str]]:
    """Label each token by its patch's overlap with a dense binary mask.

    The mask must be at the producer's processed resolution, grid_h*patch
    by grid_w*patch. A token is positive iff strictly more than half of
    its patch pixels are mask-positive.
    """
    mask = np.asarray(dense_mask).astype(bool)
    patch = grid.meta.patch
    expect = (grid.grid_h * patch, grid.grid_w * patch)
    if mask.shape != expect:
        raise ValueError(f"mask shape {mask.shape} does not match token grid raster {expect}")
    counts = (
        mask.reshape(grid.grid_h, patch, grid.grid_w, patch)
        .sum(axis=(1, 3))
        .reshape(-1)
    )
    half = patch * patch  # strict: 2 * covered > patch^2
    return [
        (i, POSITIVE if 2 * int(c) > half else NEGATIVE)
        for i, c in enumerate(counts)
    ]


def score_relevance(bank: PriorBank, grid: TokenGrid, k_sim: int) -> np.ndarray:
    """r_j = mean of the k_sim largest token cosine similarities per entry."""
    if not bank.entries:
        raise ValueError("empty prior bank")
    if not 1 <= k_sim <= grid.n:
        raise ValueError(f"k_sim must satisfy 1 <= k_sim <= {grid.n}, got {k_sim}")
    sims = bank.matrix() @ grid.tokens.astype(np.float64).T
    if k_sim == grid.n:
        return sims.mean(axis=1)
    top = np.partition(sims, grid.n - k_sim, axis=1)[:, grid.n - k_sim :]
    return top.mean(axis=1)


def _select_label(
    bank: PriorBank,
    relevance: np.ndarray,
    label: str,
    cfg: RetrievalConfig,
    rng: np.random.Generator,
) -> list[int]:
    pool = bank.label_indices(label)
    if pool.size == 0:
        raise MissingLabelError(f"bank has no {label} entries")
    quota = min(cfg.max_per_label, pool.size)
    if cfg.mode == "random":
        return sorted(int(i) for i in rng.choice(pool, size=quota, replace=False))
    # Stable order: descending relevance, ties by lower bank index.
    by_rel = pool[np.lexsort((pool, -relevance[pool]))]
    if cfg.mode == "nearest":
        return [int(i) for i in by_rel[:quota]]
    candidates = [int(i) for i in by_rel[: cfg.prefilter]]
    embeddings = bank.matrix()
    selected: list[int] = []
    while candidates and len(selected) < quota:
        if selected:
            sel = embeddings[selected]
            best_idx, best_score = None, -np.inf
            for j in candidates:
                penalty = float(np.max(sel @ embeddings[j]))
                score = float(relevance[j]) - cfg.lambda_mmr * penalty
                # Ties go to the lower bank index.
                if score > best_score or (score == best_score and j < best_idx):
                    best_idx, best_score = j, score
            pick = best_idx
        else:
            pick = candidates[0]  # first pick: raw relevance
        selected.append(pick)
        candidates.remove(pick)
    return selected


def select_priors(bank: PriorBank, grid: TokenGrid, cfg: RetrievalConfig) -> PriorSelection:
    """Per-label retrieval; deterministic for a fixed (bank, grid, cfg)."""
    cfg.validate()
    bank.validate()
    relevance = score_relevance(bank, grid, cfg.k_sim)
    rng = np.random.default_rng(cfg.seed)
    pos_idx = _select_label(bank, relevance, POSITIVE, cfg, rng)
    neg_idx = _select_label(bank, relevance, NEGATIVE, cfg, rng)
    shortfall = min(len(pos_idx), len(neg_idx)) < cfg.max_per_label
    return PriorSelection(
        positive=[bank.entries[i] for i in pos_idx],
        negative=[bank.entries[i] for i in neg_idx],
        positive_bank_indices=pos_idx,
        negative_bank_indices=neg_idx,
        shortfall=shortfall,
    )


def save_bank(bank: PriorBank, directory: str | Path) -> None:
    """Write bank.meta.json plus the f32 little-endian embedding blob."""
    bank.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "dim": bank.dim,
        "entries": [
            {"source_image": e.source_image, "token_index": e.token_index, "label": e.label}
            for e in bank.entries
        ],
    }
    (directory / "bank.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    blob = np.ascontiguousarray(bank.matrix(), dtype="<f4")
    (directory / "bank.embed.bin").write_bytes(blob.tobytes())


def load_bank(directory: str | Path) -> PriorBank:
    directory = Path(directory)
    meta_path = directory / "bank.meta.json"
    blob_path = directory / "bank.embed.bin"
    if not meta_path.exists() or not blob_path.exists():
        raise FormatError(f"{directory}: missing bank.meta.json or bank.embed.bin")
    try:
        meta = json.loads(meta_path.read_text())
        dim = int(meta["dim"])
        rows = meta["entries"]
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad bank manifest {meta_path}: {exc}") from exc
    raw = np.frombuffer(blob_path.read_bytes(), dtype="<f4")
    if raw.size != len(rows) * dim:
        raise FormatError(
            f"{blob_path}: expected {len(rows)}x{dim} f32 payload, found {raw.size} values"
        )
    if not np.all(np.isfinite(raw)):
        raise FormatError(f"{blob_path}: non-finite embedding entry")
    matrix = l2_normalize(raw.reshape(len(rows), dim).astype(np.float64))
    entries = [
        PriorEntry(
            embedding=matrix[i],
            label=str(row["label"]),
            source_image=str(row["source_image"]),
            token_index=int(row["token_index"]),
        )
        for i, row in enumerate(rows)
    ]
    bank = PriorBank(entries=entries, dim=dim)
    bank.validate()
    return bank
