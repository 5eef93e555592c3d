from .align import (
    BAND_STDS,
    DIRECTIONS,
    DOWNSTREAM_MISSING,
    UPSTREAM_MISSING,
    AlignmentResult,
    align_downstream_missing,
    align_upstream_missing,
    append_features,
    select_important_features,
)
from .predictor import FeaturePredictor, TargetLayout, feature_errors, fit_feature_predictor, joint_loss, predictor_outputs_in_band

__all__ = [
    "BAND_STDS", "DIRECTIONS", "DOWNSTREAM_MISSING", "UPSTREAM_MISSING", "AlignmentResult", "FeaturePredictor",
    "TargetLayout", "align_downstream_missing", "align_upstream_missing", "append_features", "feature_errors",
    "fit_feature_predictor", "joint_loss", "predictor_outputs_in_band", "select_important_features",
]
