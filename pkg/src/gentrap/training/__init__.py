"""Loss, training loops, metrics and experiment drivers."""

from .experiments import (
    COMPARISON_MODELS,
    FRACTIONS,
    ComparisonReport,
    GeneralizationReport,
    RunOutcome,
    nested_link_subsets,
    run_comparison,
    run_generalization,
    run_model,
)
from .loop import (
    EpochRecord,
    TrainConfig,
    TrainResult,
    choose_threshold,
    draw_k,
    evaluate,
    fit_ae_and_threshold,
    predict,
    predict_proba,
    reconstruction_errors,
    train,
)
from .loss import LAMBDA_PRESETS, class_ratio_lambda, logits_weighted_cross_entropy, weighted_cross_entropy
from .metrics import MetricsReport, macro_f1

__all__ = [name for name in dir() if not name.startswith("_")]
