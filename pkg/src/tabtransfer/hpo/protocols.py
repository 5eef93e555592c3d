"""Objectives for the two tuning protocols.

``TransferExtractor`` scores a configuration by supervised pre-training on the
full upstream data and its mean upstream-validation AUC. ``BaselineSubsample``
scores it by training on one upstream target subsampled to the downstream
size and measuring validation AUC on that target.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..data.dataset import Dataset
from ..gbdt.stacking import evaluate_dataset, fit_dataset
from ..pretrain.config import SUPERVISED, PretrainConfig
from ..pretrain.strategies import pretrain_supervised
from ..transfer.plan import FROM_SCRATCH, MAX_DOWNSTREAM_EPOCHS, EpochPolicy, make_plan
from ..transfer.downstream import train_from_scratch
from .search import ObjectiveValue
from .space import GBDT, space_for

TRANSFER_EXTRACTOR = "TransferExtractor"
BASELINE_SUBSAMPLE = "BaselineSubsample"
PROTOCOLS = (TRANSFER_EXTRACTOR, BASELINE_SUBSAMPLE)


@dataclass
class TuningContext:
    """Upstream data available for tuning; downstream rows are never part of it.

    For ``GBDT`` the datasets hold raw (imputed) features, otherwise preprocessed ones.
    """

    family: str
    upstream_train: Dataset
    upstream_val: Dataset
    n_samples: Optional[int] = None
    seed: int = 0
    pretrain: PretrainConfig = field(default_factory=lambda: PretrainConfig(SUPERVISED))
    max_epochs: int = MAX_DOWNSTREAM_EPOCHS
    target: Optional[int] = None

    def chosen_target(self) -> int:
        if self.target is not None:
            return self.target
        return int(np.random.default_rng([self.seed, 0x7A6E]).integers(self.upstream_train.n_targets))


def subsample_rows(ds: Dataset, target: int, n: int, seed: int) -> np.ndarray:
    """``n`` rows for one target, with at least one row of each class when possible."""
    if n > ds.n_rows:
        raise ValueError(f"cannot subsample {n} rows from {ds.n_rows}")
    rng = np.random.default_rng([seed, 0x5B5A])
    y = ds.Y[:, target]
    rows = rng.permutation(ds.n_rows)[:n]
    for c in (0, 1):
        if n >= 2 and not np.any(y[rows] == c) and np.any(y == c):
            candidates = np.flatnonzero(y == c)
            rows[-1 - c] = rng.choice(candidates)
    return np.sort(rows)


def transfer_extractor_objective(ctx: TuningContext) -> Callable[[dict], ObjectiveValue]:
    space = space_for(ctx.family)

    def objective(config: dict) -> ObjectiveValue:
        spec = space.build(config)
        result = pretrain_supervised(spec, ctx.upstream_train, replace(ctx.pretrain, lr=None, weight_decay=None),
                                     seed=ctx.seed, val=ctx.upstream_val)
        ckpt = result.checkpoint
        return ckpt.best_metric, {"best_epoch": ckpt.best_epoch, "epochs_run": ckpt.epochs_run,
                                  "rows_used": ctx.upstream_train.n_rows}

    return objective


def baseline_subsample_objective(ctx: TuningContext) -> Callable[[dict], ObjectiveValue]:
    if ctx.n_samples is None:
        raise ValueError("BaselineSubsample needs the downstream sample size")
    space = space_for(ctx.family)
    target = ctx.chosen_target()
    rows = subsample_rows(ctx.upstream_train, target, ctx.n_samples, ctx.seed)
    train = ctx.upstream_train.select_targets([target]).subset(rows)
    val = ctx.upstream_val.select_targets([target])

    def objective(config: dict) -> ObjectiveValue:
        built = space.build(config)
        if ctx.family == GBDT:
            model = fit_dataset(train, built, seed=ctx.seed)
            return evaluate_dataset(model, val), {"target": target, "rows_used": train.n_rows}
        plan = make_plan(FROM_SCRATCH, train.n_rows, variant="FS", tuned_epoch=ctx.max_epochs,
                         override=EpochPolicy.fixed(ctx.max_epochs))
        plan = replace(plan, lr=built.lr, weight_decay=built.weight_decay)
        out = train_from_scratch(built, plan, train, seed=ctx.seed, monitor=val)
        curve = out.log.column("monitor_auc")
        best = int(np.argmax(curve))
        return float(curve[best]), {"best_epoch": best + 1, "target": target, "rows_used": train.n_rows}

    return objective


def tuning_protocol(kind: str, ctx: TuningContext) -> Callable[[dict], ObjectiveValue]:
    if kind == TRANSFER_EXTRACTOR:
        if ctx.family == GBDT:
            raise ValueError("the TransferExtractor protocol tunes neural feature extractors only")
        return transfer_extractor_objective(ctx)
    if kind == BASELINE_SUBSAMPLE:
        return baseline_subsample_objective(ctx)
    raise ValueError(f"unknown tuning protocol {kind!r}; expected one of {PROTOCOLS}")
