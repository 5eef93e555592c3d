from .protocols import (
    BASELINE_SUBSAMPLE,
    PROTOCOLS,
    TRANSFER_EXTRACTOR,
    TuningContext,
    baseline_subsample_objective,
    subsample_rows,
    transfer_extractor_objective,
    tuning_protocol,
)
from .search import DEFAULT_BUDGET, FAILED, OK, SearchResult, Trial, random_search
from .space import (
    GBDT,
    LogUniform,
    SearchSpace,
    Uniform,
    UniformInt,
    ZeroOr,
    ft_transformer_space,
    gbdt_space,
    mlp_space,
    resnet_space,
    space_for,
)

__all__ = [
    "BASELINE_SUBSAMPLE", "DEFAULT_BUDGET", "FAILED", "GBDT", "OK", "PROTOCOLS", "TRANSFER_EXTRACTOR",
    "LogUniform", "SearchResult", "SearchSpace", "Trial", "TuningContext", "Uniform", "UniformInt", "ZeroOr",
    "baseline_subsample_objective", "ft_transformer_space", "gbdt_space", "mlp_space", "random_search",
    "resnet_space", "space_for", "subsample_rows", "transfer_extractor_objective", "tuning_protocol",
]
