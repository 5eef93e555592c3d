"""Significance-aware per-task ranking and aggregation across tasks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .stats import GREATER, wilcoxon_rank_sum

ALPHA = 0.05


def stderr(values) -> float:
    """Standard error of the mean (sample standard deviation over sqrt(n)); 0 for a single value."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return float(np.std(v, ddof=1) / np.sqrt(v.size))


def task_ranks(scores: Mapping[str, Sequence[float]], alpha: float = ALPHA) -> dict[str, int]:
    """Rank models on one task by iterated peel-off.

    The best remaining model by mean score, and every remaining model not
    significantly worse than it (one-sided rank-sum p >= alpha for "best
    greater than candidate"), share the current rank; they are removed and the
    next rank is assigned to the rest. Mean-score ties go to the model listed first.
    """
    counts = {len(v) for v in scores.values()}
    if len(counts) > 1:
        raise ValueError(f"models have unequal seed counts on this task: {sorted(counts)}")
    remaining = list(scores)
    ranks: dict[str, int] = {}
    rank = 1
    while remaining:
        means = [float(np.mean(scores[m])) for m in remaining]
        best = remaining[int(np.argmax(means))]
        group = [m for m in remaining
                 if m == best or wilcoxon_rank_sum(scores[m], scores[best], GREATER) >= alpha]
        for m in group:
            ranks[m] = rank
        remaining = [m for m in remaining if m not in group]
        rank += 1
    return ranks


@dataclass
class RankTable:
    per_task: dict[str, dict[str, int]]
    models: list[str]
    mean_rank: dict[str, float] = field(default_factory=dict)
    rank_stderr: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"model": m, "mean_rank": self.mean_rank[m], "stderr": self.rank_stderr[m]} for m in self.models]


def compute_ranks(results: Mapping[str, Mapping[str, Sequence[float]]], alpha: float = ALPHA) -> RankTable:
    """``results[task][model]`` holds per-seed scores; every model must appear on every task."""
    tasks = list(results)
    if not tasks:
        raise ValueError("no tasks to rank")
    models = list(results[tasks[0]])
    for t in tasks:
        if set(results[t]) != set(models):
            raise ValueError(f"task {t!r} has a different model set")
    per_task = {t: task_ranks({m: results[t][m] for m in models}, alpha) for t in tasks}
    table = RankTable(per_task, models)
    for m in models:
        r = [per_task[t][m] for t in tasks]
        table.mean_rank[m] = float(np.mean(r))
        table.rank_stderr[m] = stderr(r)
    return table
