"""Ranking metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    pass


def roc_auc(y_true, score) -> float:
    """Area under the ROC curve via the rank-sum identity; ties count one half."""
    y = np.asarray(y_true).reshape(-1)
    s = np.asarray(score, dtype=np.float64).reshape(-1)
    if y.shape != s.shape:
        raise ValueError(f"roc_auc: {y.shape} labels vs {s.shape} scores")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("roc_auc: labels contain a single class")
    if not np.all(np.isfinite(s)):
        raise ValueError("roc_auc: non-finite scores")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def mean_auc(Y, scores) -> float:
    """Mean per-column AUC over columns where both classes occur (NaN if none)."""
    Y = np.asarray(Y)
    scores = np.asarray(scores)
    values = []
    for k in range(Y.shape[1]):
        try:
            values.append(roc_auc(Y[:, k], scores[:, k]))
        except UndefinedMetricError:
            continue
    return float(np.mean(values)) if values else float("nan")
