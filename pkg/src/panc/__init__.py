"""Training-free spectral segmentation with labeled token priors.

Labeled prior embeddings join the token-affinity graph as anchor-coupled
vertices; masks come from the Fiedler vector of the degree-normalized
Laplacian, oriented and thresholded by the priors themselves.
"""

from .bank import (
    PriorBank,
    PriorEntry,
    PriorSelection,
    RepresentativeSet,
    RetrievalConfig,
    build_representatives,
    load_bank,
    save_bank,
    score_relevance,
    select_priors,
    tokens_from_mask,
)
from .binarize import (
    Mask,
    ScoreField,
    ThresholdReport,
    binarize,
    normalize_minmax,
    orient,
    threshold_median,
    threshold_roc,
)
from .errors import (
    ConvergenceError,
    DegenerateVectorError,
    FormatError,
    IsolatedVertexError,
    MissingLabelError,
    PancError,
    PipelineError,
)
from .exchange import (
    ImageMeta,
    TokenGrid,
    l2_normalize,
    make_grid,
    read_token_grid,
    write_token_grid,
)
from .fixtures import PlantedFixture, planted_clusters
from .graph import (
    AffinityMatrix,
    AnchoredGraph,
    SparseAffinity,
    augment_with_anchors,
    build_affinity,
    compute_coupling,
    sparsify,
)
from .metrics import CostEstimate, estimate_cost, iou, ipr, mean_iou
from .pipeline import (
    PRESETS,
    PipelineConfig,
    SegmentResult,
    batch_segment,
    preset_config,
    segment_image,
)
from .solver import (
    Laplacian,
    SolverConfig,
    SpectralResult,
    dense_eig_oracle,
    normalized_laplacian,
    solve_fiedler,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "AnchoredGraph",
    "ConvergenceError",
    "CostEstimate",
    "DegenerateVectorError",
    "FormatError",
    "ImageMeta",
    "IsolatedVertexError",
    "Laplacian",
    "Mask",
    "MissingLabelError",
    "PRESETS",
    "PancError",
    "PipelineConfig",
    "PipelineError",
    "PlantedFixture",
    "PriorBank",
    "PriorEntry",
    "PriorSelection",
    "RepresentativeSet",
    "RetrievalConfig",
    "ScoreField",
    "SegmentResult",
    "SolverConfig",
    "SparseAffinity",
    "SpectralResult",
    "ThresholdReport",
    "TokenGrid",
    "augment_with_anchors",
    "batch_segment",
    "binarize",
    "build_affinity",
    "build_representatives",
    "compute_coupling",
    "dense_eig_oracle",
    "estimate_cost",
    "iou",
    "ipr",
    "l2_normalize",
    "load_bank",
    "make_grid",
    "mean_iou",
    "normalize_minmax",
    "normalized_laplacian",
    "orient",
    "planted_clusters",
    "preset_config",
    "read_token_grid",
    "save_bank",
    "score_relevance",
    "segment_image",
    "select_priors",
    "solve_fiedler",
    "sparsify",
    "threshold_median",
    "threshold_roc",
    "tokens_from_mask",
    "write_token_grid",
]
