"""Text-informed tangent-kernel affinity graphs, regularized diffusion
ensembling over prompt-specific graphs, and spectral clustering.

The library is organized around a small number of composable pieces:

* :mod:`ntkclust.tensorio`  -- the NTKF feature container, labels, anchor banks
* :mod:`ntkclust.kernels`   -- kernel zoo, anchor softmax scores, tangent kernel
* :mod:`ntkclust.graph`     -- mutual q-NN sparsification and normalization
* :mod:`ntkclust.diffusion` -- consensus-affinity ensembling over prompts
* :mod:`ntkclust.spectral`  -- Laplacian embedding and k-means rounding
* :mod:`ntkclust.metrics`   -- clustering accuracy / NMI / ARI, zero-shot baseline
* :mod:`ntkclust.pipeline`  -- config schema and end-to-end orchestration
"""

from .diffusion import (
    DiffusionConfig,
    EnsembleState,
    average_affinities,
    average_anchor_banks,
    closed_form_affinity,
    diffusion_loss,
    ensemble_affinities,
    solve_simplex_weights,
    update_affinity,
)
from .graph import (
    SparseAffinity,
    affinity_from_kernel_matrix,
    build_affinity,
    laplacian,
    normalize,
)
from .kernels import (
    KernelSpec,
    kernel_matrix,
    kernel_value,
    logsumexp_score,
    ntk_oracle,
    ntk_value,
    score_gradient,
    softmax_scores,
)
from .metrics import MetricReport, accuracy, ari, evaluate, nmi, zero_shot_assign
from .pipeline import (
    PipelineConfig,
    PipelineError,
    load_config,
    run_pipeline,
    validate_config,
)
from .spectral import (
    ClusterResult,
    KMeansConfig,
    SpectralEmbedding,
    kmeans,
    spectral_cluster,
    spectral_embed,
)
from .tensorio import (
    AnchorBank,
    FormatError,
    ValidationError,
    load_anchor_bank,
    load_features,
    load_labels,
    save_anchor_bank,
    save_features,
    save_labels,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorBank",
    "ClusterResult",
    "DiffusionConfig",
    "EnsembleState",
    "FormatError",
    "KernelSpec",
    "KMeansConfig",
    "MetricReport",
    "PipelineConfig",
    "PipelineError",
    "SparseAffinity",
    "SpectralEmbedding",
    "ValidationError",
    "accuracy",
    "affinity_from_kernel_matrix",
    "ari",
    "average_affinities",
    "average_anchor_banks",
    "build_affinity",
    "closed_form_affinity",
    "diffusion_loss",
    "ensemble_affinities",
    "evaluate",
    "kernel_matrix",
    "kernel_value",
    "kmeans",
    "laplacian",
    "load_anchor_bank",
    "load_config",
    "load_features",
    "load_labels",
    "logsumexp_score",
    "nmi",
    "normalize",
    "ntk_oracle",
    "ntk_value",
    "run_pipeline",
    "save_anchor_bank",
    "save_features",
    "save_labels",
    "score_gradient",
    "softmax_scores",
    "solve_simplex_weights",
    "spectral_cluster",
    "spectral_embed",
    "update_affinity",
    "validate_config",
    "zero_shot_assign",
]
