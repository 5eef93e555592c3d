from .ensemble import (
    LEAF,
    Ensemble,
    Split,
    Tree,
    category_order,
    find_best_split,
    fit_gbdt,
    leaf_weight,
    logistic_loss,
    prior_log_odds,
    split_gain,
)
from .params import GbdtParams
from .stacking import (
    STACK_PREFIX,
    Stacker,
    dataset_matrix,
    evaluate_dataset,
    fit_dataset,
    fit_stacker,
    predict_dataset,
    stack_features,
)

__all__ = [
    "LEAF", "STACK_PREFIX", "Ensemble", "GbdtParams", "Split", "Stacker", "Tree", "category_order",
    "dataset_matrix", "evaluate_dataset", "find_best_split", "fit_dataset", "fit_gbdt", "fit_stacker",
    "leaf_weight", "logistic_loss", "predict_dataset", "prior_log_odds", "split_gain", "stack_features",
]
