"""Random search with a persisted trial log."""

from __future__ import annotations

import json
import math
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np

from .space import SearchSpace

DEFAULT_BUDGET = 50
OK = "ok"
FAILED = "failed"

ObjectiveValue = Union[float, tuple[float, dict]]


@dataclass
class Trial:
    index: int
    config: dict
    status: str
    value: Optional[float] = None
    extra: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class SearchResult:
    best_config: Optional[dict]
    best_value: Optional[float]
    trials: list[Trial]

    @property
    def best_trial(self) -> Optional[Trial]:
        ok = [t for t in self.trials if t.status == OK]
        return max(ok, key=lambda t: t.value) if ok else None

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.trials:
                fh.write(json.dumps(asdict(t), sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x: Any):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def random_search(space: SearchSpace, objective: Callable[[dict], ObjectiveValue], budget: int = DEFAULT_BUDGET,
                  seed: int = 0, log_path=None) -> SearchResult:
    """Evaluate ``budget`` i.i.d. samples and keep the highest objective value.

    An objective may return a float or ``(value, extra)``. A trial that raises or
    returns a non-finite value is logged as failed and the search continues.
    Equal values keep the earliest trial.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    configs = [space.sample(rng) for _ in range(budget)]
    trials: list[Trial] = []
    for i, config in enumerate(configs):
        try:
            out = objective(dict(config))
            value, extra = out if isinstance(out, tuple) else (out, {})
            value = float(value)
            if not math.isfinite(value):
                raise FloatingPointError(f"objective returned {value}")
            trials.append(Trial(i, config, OK, value, dict(extra)))
        except Exception as exc:  # a failed trial must not end the search
            trials.append(Trial(i, config, FAILED, error="".join(traceback.format_exception_only(type(exc), exc)).strip()))
        if log_path is not None:
            SearchResult(None, None, trials).write(log_path)
    result = SearchResult(None, None, trials)
    best = result.best_trial
    if best is not None:
        result.best_config, result.best_value = best.config, best.value
    return result
