"""cxrkit: long-tailed multi-label and zero-shot chest X-ray toolkit.

Operates on precomputed features, logits, and embeddings. Estimators follow
the scikit-learn fit/transform/predict conventions; the numeric core is plain
functions over float64 numpy arrays.
"""
from .dualbranch import (
    DualBranchAligner,
    DualBranchDataset,
    DualBranchModel,
    ProxyFoldSpec,
    TrainConfig,
    build_proxy_split,
    default_proxy_folds,
    evaluate_proxy,
    train,
    zero_shot_scores,
)
from .ensemble import (
    AP_PA,
    LATERAL,
    EnsembleWeights,
    LinearRouter,
    LogitEnsemble,
    ProjectionRouter,
    grid_search_weights,
    routed_predict,
    tta_average,
    weighted_logit_average,
)
from .losses import AslParams, LossValue, asl_loss, bce_loss, contrastive_loss, sigmoid, total_loss
from .metrics import EvalConfig, EvalReport, evaluate, mean_ap, mean_auc
from .numerics import SeededRng, cosine_similarity, finite_diff_gradient, l2_normalize_rows, permutation
from .synthdata import SynthSpec, gen_descriptions, gen_longtail, gen_projection_split
from .zeroshot import (
    EmbeddingSet,
    PromptScorer,
    PromptSet,
    TextStubEmbedder,
    class_probability_posneg,
    embed_text_stub,
    hybrid_prompt_scores,
    prompt_ensemble,
)

__version__ = "0.1.0"

__all__ = [
    "AP_PA",
    "AslParams",
    "DualBranchAligner",
    "DualBranchDataset",
    "DualBranchModel",
    "EmbeddingSet",
    "EnsembleWeights",
    "EvalConfig",
    "EvalReport",
    "LATERAL",
    "LinearRouter",
    "LogitEnsemble",
    "LossValue",
    "PromptScorer",
    "PromptSet",
    "ProjectionRouter",
    "ProxyFoldSpec",
    "SeededRng",
    "SynthSpec",
    "TextStubEmbedder",
    "TrainConfig",
    "asl_loss",
    "bce_loss",
    "build_proxy_split",
    "class_probability_posneg",
    "contrastive_loss",
    "cosine_similarity",
    "default_proxy_folds",
    "embed_text_stub",
    "evaluate",
    "evaluate_proxy",
    "finite_diff_gradient",
    "gen_descriptions",
    "gen_longtail",
    "gen_projection_split",
    "grid_search_weights",
    "hybrid_prompt_scores",
    "l2_normalize_rows",
    "mean_ap",
    "mean_auc",
    "permutation",
    "prompt_ensemble",
    "routed_predict",
    "sigmoid",
    "total_loss",
    "train",
    "tta_average",
    "weighted_logit_average",
    "zero_shot_scores",
]
