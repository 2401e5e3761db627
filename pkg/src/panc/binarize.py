"""Eigenvector orientation, min-max score normalization, and thresholding.

Orientation compares the prior-vertex medians (or means) and flips the
vector when the positive side sits lower. Min-max parameters come from
the token slice so a ScoreField always spans [0,1]; the same affine map
is applied to the prior-vertex entries, whose mapped scores may fall
outside [0,1] and are consumed as-is by the ROC threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingLabelError

DEGENERATE_RANGE = 1e-12


@dataclass(frozen=True)
class ScoreField:
    scores: np.ndarray  # (n,) float64 in [0,1]
    grid_h: int
    grid_w: int
    degenerate: bool = False

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])


@dataclass(frozen=True)
class ThresholdReport:
    t_star: float
    strategy: str  # roc | median
    j_stat: float | None  # TPR - FPR at t_star; None for median
    grid_steps: int | None  # None for the exact unique-values variant
    inverted: bool = False


@dataclass(frozen=True)
class Mask:
    bits: np.ndarray  # (n,) bool
    grid_h: int
    grid_w: int

    @property
    def n(self) -> int:
        return int(self.bits.shape[0])

    def image(self) -> np.ndarray:
        return self.bits.reshape(self.grid_h, self.grid_w)


def orient(
    v: np.ndarray,
    positive_indices: np.ndarray,
    negative_indices: np.ndarray,
    stat: str = "median",
) -> np.ndarray:
    """Flip v when the positive-side statistic is below the negative side.

    Equal statistics leave v unchanged, making the operation idempotent.
    """
    if stat not in ("median", "mean"):
        raise ValueError(f"unknown orientation statistic {stat!r}")
    pos = np.asarray(positive_indices, dtype=np.int64)
    neg = np.asarray(negative_indices, dtype=np.int64)
    if pos.size == 0 or neg.size == 0:
        raise MissingLabelError("orientation needs both label sets nonempty")
    v = np.asarray(v, dtype=np.float64)
    reduce = np.median if stat == "median" else np.mean
    if reduce(v[pos]) < reduce(v[neg]):
        return -v
    return v.copy()


def minmax_params(token_scores: np.ndarray) -> tuple[float, float, bool]:
    """(lo, span, degenerate) of the affine map used by normalize_minmax."""
    t = np.asarray(token_scores, dtype=np.float64)
    if t.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite entry in score vector")
    lo = float(t.min())
    span = float(t.max()) - lo
    return lo, span, span < DEGENERATE_RANGE


def normalize_minmax(v: np.ndarray, grid_h: int, grid_w: int) -> ScoreField:
    """Map token scores affinely onto [0,1].

    A constant input (range below 1e-12) maps to all 0.5 with the
    degenerate flag raised.
    """
    t = np.asarray(v, dtype=np.float64)
    lo, span, degenerate = minmax_params(t)
    if degenerate:
        scores = np.full(t.shape, 0.5)
    else:
        scores = (t - lo) / span
    return ScoreField(scores=scores, grid_h=grid_h, grid_w=grid_w, degenerate=degenerate)


def normalize_full(
    v: np.ndarray,
    n_tokens: int,
    grid_h: int,
    grid_w: int,
) -> tuple[ScoreField, np.ndarray]:
    """Split the oriented eigenvector into token scores and prior scores.

    The token ScoreField uses the token-slice min-max map (so it always
    spans [0,1]); the remaining entries (injected prior vertices and
    anchors) are normalized by the full-vector min-max, whose extremes the
    anchors typically set. Both maps are monotone, so thresholding stays
    order-consistent.
    """
    v = np.asarray(v, dtype=np.float64)
    field = normalize_minmax(v[:n_tokens], grid_h, grid_w)
    lo, span, degenerate = minmax_params(v)
    if degenerate:
        rest = np.full(v.shape[0] - n_tokens, 0.5)
    else:
        rest = (v[n_tokens:] - lo) / span
    return field, rest


def _roc_curve(prior_scores: np.ndarray, positive: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    preds = prior_scores[None, :] > thresholds[:, None]
    tpr = preds[:, positive].mean(axis=1)
    fpr = preds[:, ~positive].mean(axis=1)
    return tpr - fpr


def threshold_roc(
    scores: ScoreField,
    prior_scores: np.ndarray,
    prior_labels: np.ndarray,
    steps: int = 200,
    exact: bool = False,
) -> ThresholdReport:
    """Youden-J threshold over prior scores with the strict predicate s > t.

    The default scans `steps` uniform grid points t_i = i/(steps-1) and
    returns the first argmax. With `exact` the candidate set is {0} plus
    the unique prior scores clipped to [0,1]. A maximum J <= 0 means the
    priors are inverted or uninformative; the report flags it.
    """
    ps = np.asarray(prior_scores, dtype=np.float64)
    positive = np.asarray(prior_labels, dtype=bool)
    if ps.shape != positive.shape or ps.ndim != 1:
        raise ValueError("prior scores and labels must be matching 1-d arrays")
    if not positive.any() or positive.all():
        raise MissingLabelError("ROC thresholding needs priors of both labels")
    if exact:
        thresholds = np.unique(np.concatenate([[0.0], np.clip(ps, 0.0, 1.0)]))
        grid_steps = None
    else:
        if steps < 2:
            raise ValueError(f"steps must be at least 2, got {steps}")
        # arange/divide is the correctly rounded i/(steps-1); linspace's
        # step-accumulation form can land one ulp away from it.
        thresholds = np.arange(steps, dtype=np.float64) / (steps - 1)
        grid_steps = steps
    j = _roc_curve(ps, positive, thresholds)
    best = int(np.argmax(j))  # first index attaining the max
    j_best = float(j[best])
    return ThresholdReport(
        t_star=float(thresholds[best]),
        strategy="roc",
        j_stat=j_best,
        grid_steps=grid_steps,
        inverted=j_best <= 0.0,
    )


def threshold_median(scores: ScoreField) -> ThresholdReport:
    """t* = median of the token scores (even n: mean of the central pair)."""
    if scores.n < 1:
        raise ValueError("empty score field")
    return ThresholdReport(
        t_star=float(np.median(scores.scores)),
        strategy="median",
        j_stat=None,
        grid_steps=None,
    )


def binarize(scores: ScoreField, t: float) -> Mask:
    """Mask bits are scores strictly greater than t, with t in [0,1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0,1], got {t}")
    return Mask(bits=scores.scores > t, grid_h=scores.grid_h, grid_w=scores.grid_w)


def write_mask_pgm(mask: Mask, path, source_dims: tuple[int, int] | None = None) -> None:
    """Write the mask as a binary P5 graymap (0 background, 255 foreground).

    With `source_dims` = (H, W) the token-resolution mask is first
    nearest-neighbor upsampled.
    """
    img = mask.image().astype(np.uint8) * 255
    if source_dims is not None:
        h, w = source_dims
        rows = (np.arange(h) * mask.grid_h) // h
        cols = (np.arange(w) * mask.grid_w) // w
        img = img[rows][:, cols]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + img.tobytes())


def read_mask_pgm(path) -> np.ndarray:
    """Read a binary P5 graymap back into a boolean (h, w) array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary P5 graymap")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":  # comment line
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    data = np.frombuffer(raw, dtype=np.uint8, count=h * w, offset=pos)
    return data.reshape(h, w) > 127
