from .metrics import UndefinedMetricError, mean_auc, roc_auc
from .ranks import ALPHA, RankTable, compute_ranks, stderr, task_ranks
from .stats import EXACT_LIMIT, GREATER, LESS, TWO_SIDED, exact_null_distribution, rank_sum_statistic, wilcoxon_rank_sum

__all__ = [
    "ALPHA", "EXACT_LIMIT", "GREATER", "LESS", "TWO_SIDED", "RankTable", "UndefinedMetricError",
    "compute_ranks", "exact_null_distribution", "mean_auc", "rank_sum_statistic", "roc_auc", "stderr",
    "task_ranks", "wilcoxon_rank_sum",
]
