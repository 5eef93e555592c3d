"""Dataset adapters and upstream-prediction stacking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data.dataset import Dataset
from ..evaluation.metrics import roc_auc
from .ensemble import Ensemble, fit_gbdt
from .params import GbdtParams

STACK_PREFIX = "stack_"


def dataset_matrix(ds: Dataset) -> tuple[np.ndarray, tuple[int, ...], tuple[str, ...]]:
    """Numerical columns then categorical codes; returns the matrix, categorical column ids and names."""
    X = np.column_stack([ds.X_num, ds.X_cat.astype(np.float64)]) if ds.X_cat.shape[1] else ds.X_num
    n_num = ds.X_num.shape[1]
    names = tuple(c.name for c in ds.schema.numerical) + tuple(c.name for c in ds.schema.categorical)
    return np.asarray(X, dtype=np.float64), tuple(range(n_num, n_num + ds.X_cat.shape[1])), names


def fit_dataset(ds: Dataset, params: GbdtParams = GbdtParams(), seed: int = 0, target: int = 0) -> Ensemble:
    X, cat, names = dataset_matrix(ds)
    return fit_gbdt(X, ds.Y[:, target], params, seed, categorical=cat, feature_names=names)


def predict_dataset(ens: Ensemble, ds: Dataset) -> np.ndarray:
    X, _, names = dataset_matrix(ds)
    if ens.feature_names is not None and tuple(ens.feature_names) != names:
        raise ValueError("dataset columns differ from the columns the ensemble was fit on")
    return ens.predict_proba(X)


def evaluate_dataset(ens: Ensemble, ds: Dataset, target: int = 0) -> float:
    return roc_auc(ds.Y[:, target], predict_dataset(ens, ds))


@dataclass
class Stacker:
    """One ensemble per upstream target; ``transform`` appends their probabilities as numerical columns."""

    target_names: tuple[str, ...]
    models: tuple[Ensemble, ...]

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(STACK_PREFIX + t for t in self.target_names)

    def transform(self, ds: Dataset) -> Dataset:
        out = ds
        for name, model in zip(self.column_names, self.models):
            out = out.with_numerical(name, predict_dataset(model, ds))
        return out


def fit_stacker(upstream: Dataset, params: GbdtParams = GbdtParams(), seed: int = 0) -> Stacker:
    seeds = np.random.SeedSequence(seed).generate_state(max(upstream.n_targets, 1))
    models = tuple(fit_dataset(upstream, params, int(seeds[k]), target=k) for k in range(upstream.n_targets))
    return Stacker(tuple(upstream.schema.target_names), models)


def stack_features(upstream: Dataset, downstream: Dataset, params: GbdtParams = GbdtParams(), seed: int = 0,
                   stacker: Optional[Stacker] = None) -> Dataset:
    """Downstream rows with one upstream-model probability column per upstream target."""
    stacker = stacker or fit_stacker(upstream, params, seed)
    return stacker.transform(downstream)
